#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "meshran/topology.hpp"

namespace meshran {

using SessionId = std::uint32_t; // 0 reserved: "no session"

enum class ServiceType : std::uint8_t { Xurllc = 0, Embb = 1, Mmtc = 2 };

inline const char* to_string(ServiceType s) {
    switch (s) {
        case ServiceType::Xurllc: return "XURLLC";
        case ServiceType::Embb: return "EMBB";
        case ServiceType::Mmtc: return "MMTC";
    }
    return "?";
}

struct QosProfile {
    MicroSec max_latency_us = 1;
    std::uint8_t reliability_exp = 3; // error rate 10^-e, e in [3,9]
    ServiceType service_type = ServiceType::Embb;

    bool operator==(const QosProfile&) const = default;
};

struct SessionRequest {
    NodeId user_id = 0;
    NodeId destination_id = 0;
    QosProfile qos;
    std::uint8_t channel_quality = 0; // 4-bit index, 0..15

    bool operator==(const SessionRequest&) const = default;
};

struct PduSessionDesc {
    std::uint32_t id = 0;
    QosProfile qos;

    bool operator==(const PduSessionDesc&) const = default;
};

struct BearerConfig {
    std::uint16_t bearer_id = 0;
    std::uint16_t reserved_sessions = 0;

    bool operator==(const BearerConfig&) const = default;
};

enum class Reason : std::uint8_t {
    None = 0,
    NoResources = 1,
    TargetRejected = 2,
    NotAllowed = 3,
    Timeout = 4,
    NoRoute = 5,
    ProtocolViolation = 6,
    PathFailed = 7,
};

inline const char* to_string(Reason r) {
    switch (r) {
        case Reason::None: return "None";
        case Reason::NoResources: return "NoResources";
        case Reason::TargetRejected: return "TargetRejected";
        case Reason::NotAllowed: return "NotAllowed";
        case Reason::Timeout: return "Timeout";
        case Reason::NoRoute: return "NoRoute";
        case Reason::ProtocolViolation: return "ProtocolViolation";
        case Reason::PathFailed: return "PathFailed";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// Message bodies

struct RrcSessionRequest {
    SessionRequest req;
    bool operator==(const RrcSessionRequest&) const = default;
};
struct RrcSessionResponse {
    SessionId sid = 0; // 0 on rejection
    std::uint8_t accepted = 0;
    Reason reason = Reason::None;
    bool operator==(const RrcSessionResponse&) const = default;
};
struct GnbNotification {
    SessionId sid = 0;
    SessionRequest req;
    bool operator==(const GnbNotification&) const = default;
};
struct GnbNotificationResponse {
    SessionId sid = 0;
    std::uint8_t accept = 0;
    Reason reason = Reason::None;
    bool operator==(const GnbNotificationResponse&) const = default;
};
struct PathConfiguration {
    SessionId sid = 0;
    NodeId origin_gnb = 0; // gNB whose counter allocated sid
    BearerConfig bearer;
    std::vector<NodeId> forwarding_path; // UE-to-UE hop list
    std::uint16_t allocated_resources = 0;
    bool operator==(const PathConfiguration&) const = default;
};
struct PathComplete {
    SessionId sid = 0;
    bool operator==(const PathComplete&) const = default;
};
struct XnSetupRequest {
    bool operator==(const XnSetupRequest&) const = default;
};
struct XnSetupResponse {
    std::uint8_t accept = 1;
    bool operator==(const XnSetupResponse&) const = default;
};
struct XnConnectionRequest {
    NodeId user_id = 0;
    NodeId destination_id = 0;
    std::vector<PduSessionDesc> requested; // transparent RRC container
    bool operator==(const XnConnectionRequest&) const = default;
};
struct XnConnectionAck {
    NodeId user_id = 0;
    std::vector<PduSessionDesc> requested;
    std::vector<std::uint32_t> admitted;     // ids, subset of requested
    std::vector<std::uint32_t> not_admitted; // ids, complement of admitted
    bool operator==(const XnConnectionAck&) const = default;
};
struct RrcSessionConfig {
    SessionId sid = 0;
    NodeId origin_gnb = 0;
    BearerConfig bearer;
    std::vector<NodeId> forwarding_path;
    std::uint16_t allocated_resources = 0;
    bool operator==(const RrcSessionConfig&) const = default;
};
struct RrcComplete {
    SessionId sid = 0;
    bool operator==(const RrcComplete&) const = default;
};
struct MeshAuthRequest {
    SessionRequest req;
    bool operator==(const MeshAuthRequest&) const = default;
};
struct MeshAuthResponse {
    std::uint8_t accept = 0;
    Reason reason = Reason::None;
    bool operator==(const MeshAuthResponse&) const = default;
};
struct MeshScheduleRequest {
    SessionId sid = 0;
    SessionRequest req;
    bool operator==(const MeshScheduleRequest&) const = default;
};
struct MeshScheduleResponse {
    SessionId sid = 0;
    std::uint8_t accept = 0;
    Reason reason = Reason::None;
    bool operator==(const MeshScheduleResponse&) const = default;
};
struct MeshTopologyUpdate {
    NodeId node_a = 0;
    NodeId node_b = 0;
    std::uint8_t link_up = 0;
    std::uint32_t origin_seq = 0;
    bool operator==(const MeshTopologyUpdate&) const = default;
};
struct SessionRelease {
    SessionId sid = 0;
    bool operator==(const SessionRelease&) const = default;
};

using MessageBody =
    std::variant<RrcSessionRequest, RrcSessionResponse, GnbNotification,
                 GnbNotificationResponse, PathConfiguration, PathComplete,
                 XnSetupRequest, XnSetupResponse, XnConnectionRequest,
                 XnConnectionAck, RrcSessionConfig, RrcComplete, MeshAuthRequest,
                 SessionRelease, MeshTopologyUpdate, MeshAuthResponse,
                 MeshScheduleRequest, MeshScheduleResponse>;

struct MessageHeader {
    NodeId src = 0;
    NodeId dst = 0;
    std::uint64_t sent_at_us = 0;

    bool operator==(const MessageHeader&) const = default;
};

struct ProtocolMessage {
    MessageHeader hdr;
    MessageBody body;

    bool operator==(const ProtocolMessage&) const = default;
};

// Wire tags. 0x01 and 0x0E/0x0F are fixed; the mesh-layer tail spills past
// 0x0F because the union has 18 members.
enum class MsgTag : std::uint8_t {
    RrcSessionRequest = 0x01,
    RrcSessionResponse = 0x02,
    GnbNotification = 0x03,
    GnbNotificationResponse = 0x04,
    PathConfiguration = 0x05,
    PathComplete = 0x06,
    XnSetupRequest = 0x07,
    XnSetupResponse = 0x08,
    XnConnectionRequest = 0x09,
    XnConnectionAck = 0x0A,
    RrcSessionConfig = 0x0B,
    RrcComplete = 0x0C,
    MeshAuthRequest = 0x0D,
    SessionRelease = 0x0E,
    MeshTopologyUpdate = 0x0F,
    MeshAuthResponse = 0x10,
    MeshScheduleRequest = 0x11,
    MeshScheduleResponse = 0x12,
};

inline MsgTag tag_of(const MessageBody& b) {
    return static_cast<MsgTag>(b.index() + 1);
}

inline const char* tag_name(MsgTag t) {
    switch (t) {
        case MsgTag::RrcSessionRequest: return "RrcSessionRequest";
        case MsgTag::RrcSessionResponse: return "RrcSessionResponse";
        case MsgTag::GnbNotification: return "GnbNotification";
        case MsgTag::GnbNotificationResponse: return "GnbNotificationResponse";
        case MsgTag::PathConfiguration: return "PathConfiguration";
        case MsgTag::PathComplete: return "PathComplete";
        case MsgTag::XnSetupRequest: return "XnSetupRequest";
        case MsgTag::XnSetupResponse: return "XnSetupResponse";
        case MsgTag::XnConnectionRequest: return "XnConnectionRequest";
        case MsgTag::XnConnectionAck: return "XnConnectionAck";
        case MsgTag::RrcSessionConfig: return "RrcSessionConfig";
        case MsgTag::RrcComplete: return "RrcComplete";
        case MsgTag::MeshAuthRequest: return "MeshAuthRequest";
        case MsgTag::SessionRelease: return "SessionRelease";
        case MsgTag::MeshTopologyUpdate: return "MeshTopologyUpdate";
        case MsgTag::MeshAuthResponse: return "MeshAuthResponse";
        case MsgTag::MeshScheduleRequest: return "MeshScheduleRequest";
        case MsgTag::MeshScheduleResponse: return "MeshScheduleResponse";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// Codec: big-endian, frame = magic(0x4D 0x45) version(1) tag(1) length(2)
// header(src u32, dst u32, sent_at u64) payload. The length field counts
// every byte after itself.

struct CodecError {
    enum Kind { BadMagic, BadVersion, UnknownTag, Truncated, TrailingGarbage,
                InvariantViolated } kind;
    std::string detail;
};

inline const char* to_string(CodecError::Kind k) {
    switch (k) {
        case CodecError::BadMagic: return "BadMagic";
        case CodecError::BadVersion: return "BadVersion";
        case CodecError::UnknownTag: return "UnknownTag";
        case CodecError::Truncated: return "Truncated";
        case CodecError::TrailingGarbage: return "TrailingGarbage";
        case CodecError::InvariantViolated: return "InvariantViolated";
    }
    return "?";
}

using DecodeResult = std::variant<ProtocolMessage, CodecError>;

namespace wire {

constexpr std::uint8_t kMagic0 = 0x4D;
constexpr std::uint8_t kMagic1 = 0x45;
constexpr std::uint8_t kVersion = 1;

class Writer {
public:
    void u8(std::uint8_t v) { buf_.push_back(v); }
    void u16(std::uint16_t v) {
        u8(static_cast<std::uint8_t>(v >> 8));
        u8(static_cast<std::uint8_t>(v));
    }
    void u32(std::uint32_t v) {
        u16(static_cast<std::uint16_t>(v >> 16));
        u16(static_cast<std::uint16_t>(v));
    }
    void u64(std::uint64_t v) {
        u32(static_cast<std::uint32_t>(v >> 32));
        u32(static_cast<std::uint32_t>(v));
    }
    std::vector<std::uint8_t>& bytes() { return buf_; }

private:
    std::vector<std::uint8_t> buf_;
};

class Reader {
public:
    Reader(const std::uint8_t* p, std::size_t n) : p_(p), n_(n) {}

    bool ok() const { return ok_; }
    std::size_t remaining() const { return n_ - pos_; }

    std::uint8_t u8() {
        if (pos_ + 1 > n_) { ok_ = false; return 0; }
        return p_[pos_++];
    }
    std::uint16_t u16() {
        std::uint16_t hi = u8(), lo = u8();
        return static_cast<std::uint16_t>(hi << 8 | lo);
    }
    std::uint32_t u32() {
        std::uint32_t hi = u16(), lo = u16();
        return hi << 16 | lo;
    }
    std::uint64_t u64() {
        std::uint64_t hi = u32(), lo = u32();
        return hi << 32 | lo;
    }

private:
    const std::uint8_t* p_;
    std::size_t n_;
    std::size_t pos_ = 0;
    bool ok_ = true;
};

inline void put_qos(Writer& w, const QosProfile& q) {
    w.u64(static_cast<std::uint64_t>(q.max_latency_us));
    w.u8(q.reliability_exp);
    w.u8(static_cast<std::uint8_t>(q.service_type));
}

inline QosProfile get_qos(Reader& r) {
    QosProfile q;
    q.max_latency_us = static_cast<MicroSec>(r.u64());
    q.reliability_exp = r.u8();
    q.service_type = static_cast<ServiceType>(r.u8());
    return q;
}

inline void put_request(Writer& w, const SessionRequest& s) {
    w.u32(s.user_id);
    w.u32(s.destination_id);
    put_qos(w, s.qos);
    w.u8(s.channel_quality);
}

inline SessionRequest get_request(Reader& r) {
    SessionRequest s;
    s.user_id = r.u32();
    s.destination_id = r.u32();
    s.qos = get_qos(r);
    s.channel_quality = r.u8();
    return s;
}

inline void put_desc(Writer& w, const PduSessionDesc& d) {
    w.u32(d.id);
    put_qos(w, d.qos);
}

inline PduSessionDesc get_desc(Reader& r) {
    PduSessionDesc d;
    d.id = r.u32();
    d.qos = get_qos(r);
    return d;
}

inline void put_config(Writer& w, SessionId sid, NodeId origin, const BearerConfig& b,
                       const std::vector<NodeId>& path, std::uint16_t alloc) {
    w.u32(sid);
    w.u32(origin);
    w.u16(b.bearer_id);
    w.u16(b.reserved_sessions);
    w.u16(alloc);
    w.u8(static_cast<std::uint8_t>(path.size()));
    for (NodeId n : path) w.u32(n);
}

} // namespace wire

inline std::optional<std::string> check_invariants(const MessageBody& body);

inline std::vector<std::uint8_t> encode(const ProtocolMessage& msg) {
    wire::Writer payload;
    std::visit(
        [&](const auto& m) {
            using T = std::decay_t<decltype(m)>;
            auto& w = payload;
            if constexpr (std::is_same_v<T, RrcSessionRequest>) {
                wire::put_request(w, m.req);
            } else if constexpr (std::is_same_v<T, RrcSessionResponse>) {
                w.u32(m.sid); w.u8(m.accepted); w.u8(static_cast<std::uint8_t>(m.reason));
            } else if constexpr (std::is_same_v<T, GnbNotification>) {
                w.u32(m.sid); wire::put_request(w, m.req);
            } else if constexpr (std::is_same_v<T, GnbNotificationResponse>) {
                w.u32(m.sid); w.u8(m.accept); w.u8(static_cast<std::uint8_t>(m.reason));
            } else if constexpr (std::is_same_v<T, PathConfiguration>) {
                wire::put_config(w, m.sid, m.origin_gnb, m.bearer, m.forwarding_path,
                                 m.allocated_resources);
            } else if constexpr (std::is_same_v<T, PathComplete>) {
                w.u32(m.sid);
            } else if constexpr (std::is_same_v<T, XnSetupRequest>) {
                // empty payload
            } else if constexpr (std::is_same_v<T, XnSetupResponse>) {
                w.u8(m.accept);
            } else if constexpr (std::is_same_v<T, XnConnectionRequest>) {
                w.u32(m.user_id); w.u32(m.destination_id);
                w.u8(static_cast<std::uint8_t>(m.requested.size()));
                for (auto& d : m.requested) wire::put_desc(w, d);
            } else if constexpr (std::is_same_v<T, XnConnectionAck>) {
                w.u32(m.user_id);
                w.u8(static_cast<std::uint8_t>(m.requested.size()));
                for (auto& d : m.requested) wire::put_desc(w, d);
                w.u8(static_cast<std::uint8_t>(m.admitted.size()));
                for (auto id : m.admitted) w.u32(id);
                w.u8(static_cast<std::uint8_t>(m.not_admitted.size()));
                for (auto id : m.not_admitted) w.u32(id);
            } else if constexpr (std::is_same_v<T, RrcSessionConfig>) {
                wire::put_config(w, m.sid, m.origin_gnb, m.bearer, m.forwarding_path,
                                 m.allocated_resources);
            } else if constexpr (std::is_same_v<T, RrcComplete>) {
                w.u32(m.sid);
            } else if constexpr (std::is_same_v<T, MeshAuthRequest>) {
                wire::put_request(w, m.req);
            } else if constexpr (std::is_same_v<T, SessionRelease>) {
                w.u32(m.sid);
            } else if constexpr (std::is_same_v<T, MeshTopologyUpdate>) {
                w.u32(m.node_a); w.u32(m.node_b); w.u8(m.link_up); w.u32(m.origin_seq);
            } else if constexpr (std::is_same_v<T, MeshAuthResponse>) {
                w.u8(m.accept); w.u8(static_cast<std::uint8_t>(m.reason));
            } else if constexpr (std::is_same_v<T, MeshScheduleRequest>) {
                w.u32(m.sid); wire::put_request(w, m.req);
            } else if constexpr (std::is_same_v<T, MeshScheduleResponse>) {
                w.u32(m.sid); w.u8(m.accept); w.u8(static_cast<std::uint8_t>(m.reason));
            }
        },
        msg.body);

    wire::Writer f;
    f.u8(wire::kMagic0);
    f.u8(wire::kMagic1);
    f.u8(wire::kVersion);
    f.u8(static_cast<std::uint8_t>(tag_of(msg.body)));
    f.u16(static_cast<std::uint16_t>(16 + payload.bytes().size()));
    f.u32(msg.hdr.src);
    f.u32(msg.hdr.dst);
    f.u64(msg.hdr.sent_at_us);
    f.bytes().insert(f.bytes().end(), payload.bytes().begin(), payload.bytes().end());
    return f.bytes();
}

// Message-level invariants enforced on both construction paths and decode.
inline std::optional<std::string> check_invariants(const MessageBody& body) {
    return std::visit(
        [](const auto& m) -> std::optional<std::string> {
            using T = std::decay_t<decltype(m)>;
            auto bad_req = [](const SessionRequest& r) -> std::optional<std::string> {
                if (r.channel_quality > 15) return "channel_quality > 15";
                if (r.user_id == r.destination_id) return "user_id == destination_id";
                if (r.qos.reliability_exp < 3 || r.qos.reliability_exp > 9)
                    return "reliability_exp outside [3,9]";
                if (r.qos.max_latency_us < 1) return "max_latency_us < 1";
                return std::nullopt;
            };
            if constexpr (std::is_same_v<T, RrcSessionRequest>) return bad_req(m.req);
            else if constexpr (std::is_same_v<T, GnbNotification>) return bad_req(m.req);
            else if constexpr (std::is_same_v<T, MeshAuthRequest>) return bad_req(m.req);
            else if constexpr (std::is_same_v<T, MeshScheduleRequest>) return bad_req(m.req);
            else if constexpr (std::is_same_v<T, XnConnectionAck>) {
                std::set<std::uint32_t> req_ids, part;
                for (auto& d : m.requested) req_ids.insert(d.id);
                for (auto id : m.admitted)
                    if (!part.insert(id).second) return "duplicate id in partition";
                for (auto id : m.not_admitted)
                    if (!part.insert(id).second) return "duplicate id in partition";
                if (part != req_ids)
                    return "admitted/not_admitted do not partition requested";
                return std::nullopt;
            } else {
                return std::nullopt;
            }
        },
        body);
}

inline DecodeResult decode(const std::uint8_t* data, std::size_t size) {
    wire::Reader r(data, size);
    if (size < 6) return CodecError{CodecError::Truncated, "frame shorter than preamble"};
    std::uint8_t m0 = r.u8(), m1 = r.u8();
    if (m0 != wire::kMagic0 || m1 != wire::kMagic1)
        return CodecError{CodecError::BadMagic, "bad magic"};
    std::uint8_t ver = r.u8();
    if (ver != wire::kVersion)
        return CodecError{CodecError::BadVersion, "version " + std::to_string(ver)};
    std::uint8_t tag = r.u8();
    std::uint16_t len = r.u16();
    if (len < 16) return CodecError{CodecError::Truncated, "length below header size"};
    if (r.remaining() < len)
        return CodecError{CodecError::Truncated, "length exceeds buffer"};
    if (r.remaining() > len)
        return CodecError{CodecError::TrailingGarbage, "bytes past declared length"};

    ProtocolMessage msg;
    msg.hdr.src = r.u32();
    msg.hdr.dst = r.u32();
    msg.hdr.sent_at_us = r.u64();

    switch (static_cast<MsgTag>(tag)) {
        case MsgTag::RrcSessionRequest:
            msg.body = RrcSessionRequest{wire::get_request(r)};
            break;
        case MsgTag::RrcSessionResponse: {
            RrcSessionResponse m;
            m.sid = r.u32(); m.accepted = r.u8(); m.reason = static_cast<Reason>(r.u8());
            msg.body = m;
            break;
        }
        case MsgTag::GnbNotification: {
            GnbNotification m;
            m.sid = r.u32(); m.req = wire::get_request(r);
            msg.body = m;
            break;
        }
        case MsgTag::GnbNotificationResponse: {
            GnbNotificationResponse m;
            m.sid = r.u32(); m.accept = r.u8(); m.reason = static_cast<Reason>(r.u8());
            msg.body = m;
            break;
        }
        case MsgTag::PathConfiguration:
        case MsgTag::RrcSessionConfig: {
            SessionId sid = r.u32();
            NodeId origin = r.u32();
            BearerConfig b{r.u16(), r.u16()};
            std::uint16_t alloc = r.u16();
            std::uint8_t n = r.u8();
            std::vector<NodeId> path;
            for (std::uint8_t i = 0; i < n && r.ok(); ++i) path.push_back(r.u32());
            if (static_cast<MsgTag>(tag) == MsgTag::PathConfiguration)
                msg.body = PathConfiguration{sid, origin, b, std::move(path), alloc};
            else
                msg.body = RrcSessionConfig{sid, origin, b, std::move(path), alloc};
            break;
        }
        case MsgTag::PathComplete:
            msg.body = PathComplete{r.u32()};
            break;
        case MsgTag::XnSetupRequest:
            msg.body = XnSetupRequest{};
            break;
        case MsgTag::XnSetupResponse:
            msg.body = XnSetupResponse{r.u8()};
            break;
        case MsgTag::XnConnectionRequest: {
            XnConnectionRequest m;
            m.user_id = r.u32();
            m.destination_id = r.u32();
            std::uint8_t n = r.u8();
            for (std::uint8_t i = 0; i < n && r.ok(); ++i)
                m.requested.push_back(wire::get_desc(r));
            msg.body = std::move(m);
            break;
        }
        case MsgTag::XnConnectionAck: {
            XnConnectionAck m;
            m.user_id = r.u32();
            std::uint8_t n = r.u8();
            for (std::uint8_t i = 0; i < n && r.ok(); ++i)
                m.requested.push_back(wire::get_desc(r));
            std::uint8_t na = r.u8();
            for (std::uint8_t i = 0; i < na && r.ok(); ++i) m.admitted.push_back(r.u32());
            std::uint8_t nn = r.u8();
            for (std::uint8_t i = 0; i < nn && r.ok(); ++i) m.not_admitted.push_back(r.u32());
            msg.body = std::move(m);
            break;
        }
        case MsgTag::RrcComplete:
            msg.body = RrcComplete{r.u32()};
            break;
        case MsgTag::MeshAuthRequest:
            msg.body = MeshAuthRequest{wire::get_request(r)};
            break;
        case MsgTag::SessionRelease:
            msg.body = SessionRelease{r.u32()};
            break;
        case MsgTag::MeshTopologyUpdate: {
            MeshTopologyUpdate m;
            m.node_a = r.u32(); m.node_b = r.u32(); m.link_up = r.u8(); m.origin_seq = r.u32();
            msg.body = m;
            break;
        }
        case MsgTag::MeshAuthResponse: {
            MeshAuthResponse m;
            m.accept = r.u8(); m.reason = static_cast<Reason>(r.u8());
            msg.body = m;
            break;
        }
        case MsgTag::MeshScheduleRequest: {
            MeshScheduleRequest m;
            m.sid = r.u32(); m.req = wire::get_request(r);
            msg.body = m;
            break;
        }
        case MsgTag::MeshScheduleResponse: {
            MeshScheduleResponse m;
            m.sid = r.u32(); m.accept = r.u8(); m.reason = static_cast<Reason>(r.u8());
            msg.body = m;
            break;
        }
        default:
            return CodecError{CodecError::UnknownTag, "tag " + std::to_string(tag)};
    }

    if (!r.ok()) return CodecError{CodecError::Truncated, "payload shorter than fields"};
    if (r.remaining() != 0)
        return CodecError{CodecError::TrailingGarbage, "payload longer than fields"};
    if (auto bad = check_invariants(msg.body))
        return CodecError{CodecError::InvariantViolated, *bad};
    return msg;
}

inline DecodeResult decode(const std::vector<std::uint8_t>& buf) {
    return decode(buf.data(), buf.size());
}

} // namespace meshran
