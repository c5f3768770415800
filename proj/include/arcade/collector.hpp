#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "arcade/grid.hpp"
#include "arcade/nn.hpp"
#include "arcade/transport.hpp"

namespace arcade {

struct AgentConfig {
    std::int64_t window_ms = 1000;
    std::string salt;
    int max_batch = 100;
    std::string agent_id = "agent-0";

    void validate() const;
};

// First 16 bytes of SHA-256(salt || ue_id), lowercase hex (32 chars).
std::string anonymize(const std::string& ue_id, const std::string& salt);

struct Reading {
    int pci = 0;
    double mean_rsrp_dbm = 0.0;
    int count = 0;

    friend bool operator==(const Reading&, const Reading&) = default;
};

struct ConsolidatedRecord {
    std::string ue_token;
    std::int64_t window_start_ms = 0;
    std::vector<Reading> readings;  // distinct PCIs, ascending

    friend bool operator==(const ConsolidatedRecord&, const ConsolidatedRecord&) = default;
};

struct MrEvent {
    std::string ue_id;
    int pci = 0;
    double rsrp_dbm = 0.0;
    std::int64_t t_ms = 0;
};

// Tumbling windows aligned to window_ms boundaries; one record per
// (anonymized UE, window). Sum of reading counts equals the event count.
std::vector<ConsolidatedRecord> consolidate(std::vector<MrEvent> events,
                                            const AgentConfig& cfg);

// ---- Wire protocol --------------------------------------------------------
// frame = u32 BE payload length | version 0x01 | kind | payload (canonical
// compact JSON, UTF-8, keys sorted).

enum class MsgKind : std::uint8_t { Hello = 0, Batch = 1, Ack = 2, Bye = 3 };

inline constexpr std::uint8_t kWireVersion = 0x01;
inline constexpr std::size_t kMaxPayload = 16u << 20;

struct WireMessage {
    std::uint8_t version = kWireVersion;
    MsgKind kind = MsgKind::Hello;
    std::string payload;

    friend bool operator==(const WireMessage&, const WireMessage&) = default;
};

std::string encode(const WireMessage& msg);
WireMessage decode(const std::string& frame);
WireMessage read_message(ByteStream& stream);

WireMessage make_hello(const std::string& agent_id);
WireMessage make_batch(std::int64_t seq, std::span<const ConsolidatedRecord> records);
WireMessage make_ack(std::int64_t seq);
WireMessage make_bye();

std::string parse_hello(const WireMessage& msg);  // -> agent_id
struct BatchPayload {
    std::int64_t seq = 0;
    std::vector<ConsolidatedRecord> records;
};
BatchPayload parse_batch(const WireMessage& msg);
std::int64_t parse_ack(const WireMessage& msg);

// ---- Sessions -------------------------------------------------------------

// At-least-once delivery with idempotent dedup on (agent_id, window_start,
// ue_token). Thread-safe.
class RecordStore {
public:
    struct Key {
        std::string agent_id;
        std::int64_t window_start_ms;
        std::string ue_token;
        auto operator<=>(const Key&) const = default;
    };

    // Returns false when the key was already present (duplicate).
    bool store(const std::string& agent_id, const ConsolidatedRecord& record);

    std::size_t size() const;
    std::int64_t total_count() const;  // sum of reading counts over stored records
    std::vector<ConsolidatedRecord> records_for(const std::string& agent_id) const;
    std::vector<std::string> agent_ids() const;

private:
    mutable std::mutex mu_;
    std::map<Key, ConsolidatedRecord> records_;
};

struct AgentReport {
    int batches_sent = 0;
    int retries = 0;
    std::size_t records_sent = 0;
};

// Hello, Batch* (ack window of 1, up to 3 tries per batch), Bye.
AgentReport agent_run(const std::vector<MrEvent>& events, const AgentConfig& cfg,
                      ByteStream& stream);

struct SessionReport {
    std::string agent_id;
    std::size_t batches = 0;
    std::size_t duplicates = 0;
};

// Serves one agent session to completion (Bye or stream close).
SessionReport collector_session(ByteStream& stream, RecordStore& store);

// ---- MR geolocation -------------------------------------------------------

struct GeolocateResult {
    std::vector<RawSample> samples;  // positioned, source = MR
    std::size_t dropped_readings = 0;  // PCIs outside the locator's cluster
};

GeolocateResult geolocate_batch(std::span<const ConsolidatedRecord> records,
                                const Locator& locator);

}  // namespace arcade
