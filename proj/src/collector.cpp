#include "arcade/collector.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "arcade/errors.hpp"
#include "arcade/grid_io.hpp"

namespace arcade {

namespace {

using json = nlohmann::json;

json record_to_json(const ConsolidatedRecord& r) {
    json readings = json::array();
    for (const Reading& rd : r.readings)
        readings.push_back(
            {{"count", rd.count}, {"mean_rsrp_dbm", rd.mean_rsrp_dbm}, {"pci", rd.pci}});
    return {{"readings", std::move(readings)},
            {"ue_token", r.ue_token},
            {"window_start_ms", r.window_start_ms}};
}

ConsolidatedRecord record_from_json(const json& j) {
    ConsolidatedRecord r;
    r.ue_token = j.at("ue_token").get<std::string>();
    r.window_start_ms = j.at("window_start_ms").get<std::int64_t>();
    for (const auto& jr : j.at("readings"))
        r.readings.push_back({jr.at("pci").get<int>(), jr.at("mean_rsrp_dbm").get<double>(),
                              jr.at("count").get<int>()});
    if (r.readings.empty())
        throw WireError(WireErrorKind::MalformedPayload, "record with empty readings");
    return r;
}

json parse_payload(const WireMessage& msg) {
    try {
        return json::parse(msg.payload);
    } catch (const json::exception& e) {
        throw WireError(WireErrorKind::MalformedPayload, e.what());
    }
}

WireMessage expect_kind(WireMessage msg, MsgKind kind, const char* what) {
    if (msg.kind != kind)
        throw WireError(WireErrorKind::MalformedPayload,
                        std::string("expected ") + what + " message");
    return msg;
}

}  // namespace

void AgentConfig::validate() const {
    if (window_ms <= 0) throw ConfigError("AgentConfig: window_ms must be > 0");
    if (max_batch < 1) throw ConfigError("AgentConfig: max_batch must be >= 1");
}

std::string anonymize(const std::string& ue_id, const std::string& salt) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    const std::string input = salt + ue_id;
    if (EVP_Digest(input.data(), input.size(), digest, &len, EVP_sha256(), nullptr) != 1 ||
        len < 16)
        throw NumericalError("anonymize: SHA-256 unavailable");
    static const char* hex = "0123456789abcdef";
    std::string token(32, '0');
    for (int i = 0; i < 16; ++i) {
        token[2 * i] = hex[digest[i] >> 4];
        token[2 * i + 1] = hex[digest[i] & 0xf];
    }
    return token;
}

std::vector<ConsolidatedRecord> consolidate(std::vector<MrEvent> events,
                                            const AgentConfig& cfg) {
    cfg.validate();
    // (token, window, pci) -> (sum, count); map order gives deterministic output.
    std::map<std::tuple<std::string, std::int64_t, int>, std::pair<double, int>> acc;
    for (const MrEvent& e : events) {
        // Tumbling windows aligned to window_ms boundaries (floor for negatives too).
        std::int64_t w = e.t_ms / cfg.window_ms;
        if (e.t_ms < 0 && e.t_ms % cfg.window_ms != 0) --w;
        auto& slot = acc[{anonymize(e.ue_id, cfg.salt), w * cfg.window_ms, e.pci}];
        slot.first += e.rsrp_dbm;
        slot.second += 1;
    }
    std::vector<ConsolidatedRecord> out;
    for (const auto& [key, sum_count] : acc) {
        const auto& [token, window_start, pci] = key;
        if (out.empty() || out.back().ue_token != token ||
            out.back().window_start_ms != window_start) {
            out.push_back({token, window_start, {}});
        }
        out.back().readings.push_back(
            {pci, sum_count.first / sum_count.second, sum_count.second});
    }
    return out;
}

std::string encode(const WireMessage& msg) {
    if (msg.payload.size() > kMaxPayload)
        throw WireError(WireErrorKind::LengthOverflow,
                        "payload exceeds " + std::to_string(kMaxPayload) + " bytes");
    std::string frame;
    frame.reserve(6 + msg.payload.size());
    const std::uint32_t n = static_cast<std::uint32_t>(msg.payload.size());
    frame.push_back(static_cast<char>((n >> 24) & 0xff));
    frame.push_back(static_cast<char>((n >> 16) & 0xff));
    frame.push_back(static_cast<char>((n >> 8) & 0xff));
    frame.push_back(static_cast<char>(n & 0xff));
    frame.push_back(static_cast<char>(msg.version));
    frame.push_back(static_cast<char>(msg.kind));
    frame += msg.payload;
    return frame;
}

WireMessage decode(const std::string& frame) {
    if (frame.size() < 6)
        throw WireError(WireErrorKind::Truncated, "frame shorter than 6-byte header");
    const auto b = [&](std::size_t i) {
        return static_cast<std::uint32_t>(static_cast<unsigned char>(frame[i]));
    };
    const std::uint32_t n = (b(0) << 24) | (b(1) << 16) | (b(2) << 8) | b(3);
    if (n > kMaxPayload)
        throw WireError(WireErrorKind::LengthOverflow, "declared payload too large");
    if (frame.size() != 6 + n)
        throw WireError(WireErrorKind::Truncated, "frame length mismatch");
    WireMessage msg;
    msg.version = static_cast<std::uint8_t>(b(4));
    if (msg.version != kWireVersion)
        throw WireError(WireErrorKind::UnknownVersion,
                        "unknown wire version " + std::to_string(msg.version));
    const std::uint8_t kind = static_cast<std::uint8_t>(b(5));
    if (kind > static_cast<std::uint8_t>(MsgKind::Bye))
        throw WireError(WireErrorKind::UnknownKind,
                        "unknown message kind " + std::to_string(kind));
    msg.kind = static_cast<MsgKind>(kind);
    msg.payload = frame.substr(6);
    return msg;
}

WireMessage read_message(ByteStream& stream) {
    const std::string header = stream.read_string(6);
    const auto b = [&](std::size_t i) {
        return static_cast<std::uint32_t>(static_cast<unsigned char>(header[i]));
    };
    const std::uint32_t n = (b(0) << 24) | (b(1) << 16) | (b(2) << 8) | b(3);
    if (n > kMaxPayload)
        throw WireError(WireErrorKind::LengthOverflow, "declared payload too large");
    return decode(header + stream.read_string(n));
}

WireMessage make_hello(const std::string& agent_id) {
    return {kWireVersion, MsgKind::Hello, json{{"agent_id", agent_id}}.dump()};
}

WireMessage make_batch(std::int64_t seq, std::span<const ConsolidatedRecord> records) {
    json jr = json::array();
    for (const ConsolidatedRecord& r : records) jr.push_back(record_to_json(r));
    return {kWireVersion, MsgKind::Batch,
            json{{"records", std::move(jr)}, {"seq", seq}}.dump()};
}

WireMessage make_ack(std::int64_t seq) {
    return {kWireVersion, MsgKind::Ack, json{{"seq", seq}}.dump()};
}

WireMessage make_bye() { return {kWireVersion, MsgKind::Bye, "{}"}; }

std::string parse_hello(const WireMessage& msg) {
    expect_kind(msg, MsgKind::Hello, "Hello");
    try {
        return parse_payload(msg).at("agent_id").get<std::string>();
    } catch (const json::exception& e) {
        throw WireError(WireErrorKind::MalformedPayload, e.what());
    }
}

BatchPayload parse_batch(const WireMessage& msg) {
    expect_kind(msg, MsgKind::Batch, "Batch");
    try {
        const json j = parse_payload(msg);
        BatchPayload out;
        out.seq = j.at("seq").get<std::int64_t>();
        for (const auto& jr : j.at("records")) out.records.push_back(record_from_json(jr));
        return out;
    } catch (const json::exception& e) {
        throw WireError(WireErrorKind::MalformedPayload, e.what());
    }
}

std::int64_t parse_ack(const WireMessage& msg) {
    expect_kind(msg, MsgKind::Ack, "Ack");
    try {
        return parse_payload(msg).at("seq").get<std::int64_t>();
    } catch (const json::exception& e) {
        throw WireError(WireErrorKind::MalformedPayload, e.what());
    }
}

bool RecordStore::store(const std::string& agent_id, const ConsolidatedRecord& record) {
    std::lock_guard lock(mu_);
    return records_.emplace(Key{agent_id, record.window_start_ms, record.ue_token}, record)
        .second;
}

std::size_t RecordStore::size() const {
    std::lock_guard lock(mu_);
    return records_.size();
}

std::int64_t RecordStore::total_count() const {
    std::lock_guard lock(mu_);
    std::int64_t total = 0;
    for (const auto& [_, r] : records_)
        for (const Reading& rd : r.readings) total += rd.count;
    return total;
}

std::vector<ConsolidatedRecord> RecordStore::records_for(const std::string& agent_id) const {
    std::lock_guard lock(mu_);
    std::vector<ConsolidatedRecord> out;
    for (const auto& [key, r] : records_)
        if (key.agent_id == agent_id) out.push_back(r);
    return out;
}

std::vector<std::string> RecordStore::agent_ids() const {
    std::lock_guard lock(mu_);
    std::vector<std::string> out;
    for (const auto& [key, _] : records_)
        if (out.empty() || out.back() != key.agent_id) out.push_back(key.agent_id);
    return out;
}

AgentReport agent_run(const std::vector<MrEvent>& events, const AgentConfig& cfg,
                      ByteStream& stream) {
    cfg.validate();
    const std::vector<ConsolidatedRecord> records = consolidate(events, cfg);

    AgentReport report;
    stream.write_all(encode(make_hello(cfg.agent_id)));
    std::int64_t seq = 0;
    for (std::size_t start = 0; start < records.size();
         start += static_cast<std::size_t>(cfg.max_batch)) {
        const std::size_t count =
            std::min<std::size_t>(cfg.max_batch, records.size() - start);
        const std::span<const ConsolidatedRecord> batch(records.data() + start, count);
        const std::string frame = encode(make_batch(seq, batch));
        bool acked = false;
        for (int attempt = 0; attempt < 3 && !acked; ++attempt) {
            if (attempt > 0) ++report.retries;
            try {
                stream.write_all(frame);
                if (parse_ack(read_message(stream)) == seq) acked = true;
            } catch (const TransportError&) {
                // batch lost in flight; resend (at-least-once, collector dedups)
            }
        }
        if (!acked)
            throw TransportError("batch " + std::to_string(seq) +
                                 " not acknowledged after 3 attempts");
        ++report.batches_sent;
        report.records_sent += count;
        ++seq;
    }
    stream.write_all(encode(make_bye()));
    return report;
}

SessionReport collector_session(ByteStream& stream, RecordStore& store) {
    SessionReport report;
    report.agent_id = parse_hello(read_message(stream));
    for (;;) {
        WireMessage msg;
        try {
            msg = read_message(stream);
        } catch (const TransportError&) {
            break;  // agent went away; everything acked so far is persisted
        }
        if (msg.kind == MsgKind::Bye) break;
        const BatchPayload batch = parse_batch(msg);
        for (const ConsolidatedRecord& r : batch.records)
            if (!store.store(report.agent_id, r)) ++report.duplicates;
        ++report.batches;
        stream.write_all(encode(make_ack(batch.seq)));
    }
    return report;
}

GeolocateResult geolocate_batch(std::span<const ConsolidatedRecord> records,
                                const Locator& locator) {
    GeolocateResult out;
    for (const ConsolidatedRecord& r : records) {
        std::map<int, double> readings;
        std::vector<const Reading*> kept;
        for (const Reading& rd : r.readings) {
            if (std::binary_search(locator.pcis.begin(), locator.pcis.end(), rd.pci)) {
                readings[rd.pci] = rd.mean_rsrp_dbm;
                kept.push_back(&rd);
            } else {
                ++out.dropped_readings;
            }
        }
        if (kept.empty()) continue;
        const std::vector<double> fp =
            make_fingerprint(readings, locator.pcis, locator.floor_dbm);
        const GeoPoint pos = geolocate(locator, fp);
        for (const Reading* rd : kept) {
            RawSample s;
            s.pci = rd->pci;
            s.rsrp_dbm = rd->mean_rsrp_dbm;
            s.position = pos;
            s.timestamp_ms = r.window_start_ms;
            s.source = Source::MR;
            s.ue_token = r.ue_token;
            out.samples.push_back(std::move(s));
        }
    }
    return out;
}

}  // namespace arcade
