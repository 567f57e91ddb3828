#include "certkit/digest.hpp"

#include <algorithm>

#include <memory>

#include <openssl/evp.h>

#include "certkit/errors.hpp"
#include "certkit/hasher.hpp"

namespace certkit {

namespace {

constexpr char kHexDigits[] = "0123456789abcdef";

int hex_value(char c) noexcept
{
    if (c >= '0' && c <= '9') {
        return c - '0';
    }
    if (c >= 'a' && c <= 'f') {
        return c - 'a' + 10;
    }
    return -1;
}

} // namespace

std::string to_hex(ByteView data)
{
    std::string out;
    out.reserve(data.size() * 2);
    for (std::uint8_t b : data) {
        out.push_back(kHexDigits[b >> 4]);
        out.push_back(kHexDigits[b & 0x0f]);
    }
    return out;
}

Bytes from_hex(std::string_view hex)
{
    if (hex.size() % 2 != 0) {
        throw Error(Errc::Parse, "hex string has odd length");
    }
    Bytes out(hex.size() / 2);
    for (std::size_t i = 0; i < out.size(); ++i) {
        int hi = hex_value(hex[2 * i]);
        int lo = hex_value(hex[2 * i + 1]);
        if (hi < 0 || lo < 0) {
            throw Error(Errc::Parse,
                        "invalid hex character at offset " + std::to_string(2 * i));
        }
        out[i] = static_cast<std::uint8_t>((hi << 4) | lo);
    }
    return out;
}

std::string Digest::to_hex() const
{
    return certkit::to_hex(bytes);
}

Digest Digest::from_hex(std::string_view hex)
{
    if (hex.size() != 2 * kSize) {
        throw Error(Errc::Parse, "digest hex must be 64 characters, got " +
                                     std::to_string(hex.size()));
    }
    Bytes raw = certkit::from_hex(hex);
    Digest d;
    std::copy(raw.begin(), raw.end(), d.bytes.begin());
    return d;
}

namespace {

// OpenSSL 3's one-shot SHA256() fetches the algorithm on every call; fetch
// once and reuse one context per thread.
const EVP_MD* sha256_md()
{
    static const std::unique_ptr<EVP_MD, decltype(&EVP_MD_free)> md(EVP_MD_fetch(nullptr, "SHA256", nullptr),
                                                                    &EVP_MD_free);
    if (!md) {
        throw Error(Errc::Invariant, "SHA-256 is unavailable in libcrypto");
    }
    return md.get();
}

EVP_MD_CTX* thread_context()
{
    thread_local const std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(),
                                                                                   &EVP_MD_CTX_free);
    if (!ctx) {
        throw Error(Errc::Invariant, "cannot allocate a digest context");
    }
    return ctx.get();
}

} // namespace

Digest sha256(ByteView data)
{
    EVP_MD_CTX* ctx = thread_context();
    Digest d;
    unsigned int len = 0;
    if (EVP_DigestInit_ex(ctx, sha256_md(), nullptr) != 1 || EVP_DigestUpdate(ctx, data.data(), data.size()) != 1 ||
        EVP_DigestFinal_ex(ctx, d.bytes.data(), &len) != 1 || len != Digest::kSize) {
        throw Error(Errc::Invariant, "SHA-256 computation failed");
    }
    return d;
}

Digest Hasher::combine(const Digest& left, const Digest& right) const
{
    std::array<std::uint8_t, 2 * Digest::kSize> buf;
    std::copy(left.bytes.begin(), left.bytes.end(), buf.begin());
    std::copy(right.bytes.begin(), right.bytes.end(), buf.begin() + Digest::kSize);
    return (*this)(buf);
}

} // namespace certkit
