#include "certkit/errors.hpp"

namespace certkit {

const char* errc_name(Errc code) noexcept
{
    switch (code) {
    case Errc::InvalidArgument: return "invalid argument";
    case Errc::NoData: return "no data to certify";
    case Errc::UnknownLeaf: return "unknown leaf";
    case Errc::NotLeafIndex: return "not a leaf index";
    case Errc::Parse: return "parse error";
    case Errc::Invariant: return "invariant violation";
    case Errc::UnknownRef: return "unknown ref";
    case Errc::CapacityExceeded: return "level capacity exceeded";
    case Errc::DuplicateId: return "duplicate id";
    case Errc::UnknownItem: return "unknown item";
    case Errc::EmptyBatch: return "empty batch";
    case Errc::ApproachMismatch: return "approach mismatch";
    case Errc::RetryRequired: return "retry required";
    case Errc::TxNotFound: return "transaction not located";
    case Errc::OversizeData: return "oversize data";
    case Errc::TreeMissing: return "tree file missing";
    case Errc::Io: return "i/o error";
    }
    return "unknown error";
}

} // namespace certkit
