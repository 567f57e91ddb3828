#pragma once

#include <cstdint>

#include "certkit/digest.hpp"

namespace certkit {

Digest sha256(ByteView data);

/// Hash function handle used by tree construction and verification.
///
/// Internal nodes hash the raw concatenation of the two child digests with
/// no domain-separation prefix. A hasher may carry a counter that is bumped
/// on every invocation; instrumented tests use it to check hash-count laws.
class Hasher {
public:
    using Fn = Digest (*)(ByteView);

    Hasher() noexcept = default;
    explicit Hasher(Fn fn) noexcept : fn_(fn) {}

    Digest operator()(ByteView data) const
    {
        if (counter_ != nullptr) {
            ++*counter_;
        }
        return fn_(data);
    }

    /// H(left || right)
    Digest combine(const Digest& left, const Digest& right) const;

    /// Copy of this hasher that increments `counter` on each call.
    Hasher counting(std::uint64_t& counter) const noexcept
    {
        Hasher h = *this;
        h.counter_ = &counter;
        return h;
    }

private:
    Fn fn_ = &sha256;
    std::uint64_t* counter_ = nullptr;
};

} // namespace certkit
