#pragma once

#include <stdexcept>
#include <string>

namespace certkit {

enum class Errc {
    InvalidArgument,
    NoData,            // "no data to certify"
    UnknownLeaf,
    NotLeafIndex,
    Parse,
    Invariant,
    UnknownRef,
    CapacityExceeded,
    DuplicateId,
    UnknownItem,
    EmptyBatch,
    ApproachMismatch,
    RetryRequired,
    TxNotFound,        // "transaction not located"
    OversizeData,
    TreeMissing,
    Io,
};

const char* errc_name(Errc code) noexcept;

/// Single exception type for the library; callers branch on code().
class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what)
        : std::runtime_error(what), code_(code) {}

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

} // namespace certkit
