#pragma once

// Persistence for bandit state: JSON snapshots and an append-only JSON-lines
// event log that replays to the live state exactly.
//
// Log line: {"seq": n, "ts": "...", "type": "round" | "rank_refresh" |
// "rank_drop" | "snapshot", "payload": {...}}. A line is committed once its
// trailing newline is on disk; an unterminated or unparsable last line is a
// torn write and is dropped with a warning.

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstdio>
#include <cstring>
#include <ctime>
#include <fstream>
#include <functional>
#include <istream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "geonet/bandit.hpp"
#include "geonet/errors.hpp"
#include "geonet/flowmodel/arcs.hpp"

namespace geonet {

using json = nlohmann::json;

inline constexpr const char* kSnapshotVersion = "geonet.bandit/1";

inline std::vector<ArcRecord> ingest_arcs(const std::string& path) { return read_arcs_csv(path); }

inline json snapshot_json(const BanditState& s) {
    json j;
    j["version"] = kSnapshotVersion;
    j["t"] = s.t;
    j["alpha0"] = from_micro(s.alpha0_micro);
    j["beta0"] = from_micro(s.beta0_micro);
    j["rankpct_defaulted"] = s.rankpct_defaulted;
    j["origins"] = s.origins;
    auto& dests = j["dests"] = json::array();
    for (int d = 0; d < s.n_dest(); ++d) {
        json jd;
        jd["dest_id"] = s.dests[d];
        jd["round"] = s.rounds[static_cast<std::size_t>(d)];
        auto& arcs = jd["arcs"] = json::array();
        for (int i = 0; i < s.n_fc(); ++i) {
            const auto& p = s.at(d, i);
            arcs.push_back({{"origin_id", s.origins[i]}, {"alpha", p.alpha()}, {"beta", p.beta()}, {"rankpct", p.rankpct}});
        }
        dests.push_back(std::move(jd));
    }
    return j;
}

namespace detail {

inline std::int64_t positive_micro(const json& v, const char* what) {
    const auto m = to_micro(v.get<double>());
    if (m <= 0) throw data_error(std::string("snapshot: ") + what + " must be positive");
    return m;
}

}  // namespace detail

inline BanditState state_from_json(const json& j) {
    try {
        const auto version = j.at("version").get<std::string>();
        if (version != kSnapshotVersion)
            throw data_error("snapshot version '" + version + "' does not match '" + kSnapshotVersion + "'");
        BanditState s;
        s.t = j.at("t").get<long>();
        s.alpha0_micro = detail::positive_micro(j.at("alpha0"), "alpha0");
        s.beta0_micro = detail::positive_micro(j.at("beta0"), "beta0");
        s.rankpct_defaulted = j.value("rankpct_defaulted", std::size_t{0});
        s.origins = j.at("origins").get<std::vector<std::string>>();
        if (s.origins.empty() || !std::is_sorted(s.origins.begin(), s.origins.end()) ||
            std::adjacent_find(s.origins.begin(), s.origins.end()) != s.origins.end())
            throw data_error("snapshot: origins must be non-empty, sorted and unique");
        for (const auto& jd : j.at("dests")) s.dests.push_back(jd.at("dest_id").get<std::string>());
        if (s.dests.empty() || !std::is_sorted(s.dests.begin(), s.dests.end()) ||
            std::adjacent_find(s.dests.begin(), s.dests.end()) != s.dests.end())
            throw data_error("snapshot: destinations must be non-empty, sorted and unique");
        s.posteriors.resize(s.origins.size() * s.dests.size());
        for (const auto& jd : j.at("dests")) {
            const int d = s.dest_index(jd.at("dest_id").get<std::string>());
            s.rounds.push_back(jd.at("round").get<long>());
            const auto& arcs = jd.at("arcs");
            if (arcs.size() != s.origins.size())
                throw data_error("snapshot: destination '" + s.dests[d] + "' does not cover every origin");
            for (const auto& ja : arcs) {
                const auto origin = ja.at("origin_id").get<std::string>();
                auto& p = s.at(d, s.origin_index(origin));
                p.alpha_micro = detail::positive_micro(ja.at("alpha"), "alpha");
                p.beta_micro = detail::positive_micro(ja.at("beta"), "beta");
                p.rankpct = ja.at("rankpct").get<double>();
                if (!(p.rankpct >= 0.0 && p.rankpct <= 1.0)) throw data_error("snapshot: rankpct outside [0, 1]");
            }
        }
        return s;
    } catch (const json::exception& e) {
        throw data_error(std::string("malformed snapshot: ") + e.what());
    } catch (const unknown_id_error& e) {
        throw data_error(std::string("malformed snapshot: ") + e.what());
    }
}

namespace detail {

inline void fsync_path(const std::string& path, int flags) {
    const int fd = ::open(path.c_str(), flags);
    if (fd < 0) return;
    ::fsync(fd);
    ::close(fd);
}

inline std::string parent_dir(const std::string& path) {
    const auto slash = path.find_last_of('/');
    if (slash == std::string::npos) return ".";
    return slash == 0 ? "/" : path.substr(0, slash);
}

// Write to a sibling temp file, fsync, rename over the target.
inline void write_file_atomic(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw data_error("cannot write '" + tmp + "'");
        out << content;
        if (!out.flush()) throw data_error("write failed for '" + tmp + "'");
    }
    fsync_path(tmp, O_RDONLY);
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw data_error("cannot rename '" + tmp + "': " + std::strerror(errno));
    fsync_path(parent_dir(path), O_RDONLY | O_DIRECTORY);
}

inline std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t secs = std::chrono::system_clock::to_time_t(now);
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
    std::tm tm{};
    gmtime_r(&secs, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
    char out[40];
    std::snprintf(out, sizeof out, "%s.%03dZ", buf, static_cast<int>(ms));
    return out;
}

}  // namespace detail

inline void snapshot(const BanditState& s, const std::string& path) {
    detail::write_file_atomic(path, snapshot_json(s).dump(1) + "\n");
}

inline BanditState restore(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw data_error("cannot open '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw data_error("'" + path + "': " + e.what());
    }
    return state_from_json(j);
}

struct Event {
    long long seq = 0;
    std::string ts;
    std::string type;
    json payload;
};

inline json round_payload(const RecommendationRound& r, const std::vector<std::string>& selected, FeedbackMode mode) {
    return {{"dest_id", r.dest_id}, {"t", r.t},           {"k", r.k},
            {"seed", r.seed},       {"bootstrap", r.bootstrap}, {"mode", to_string(mode)},
            {"recommended", r.recommended}, {"selected", selected}, {"theta_hat", r.theta_hat},
            {"theta_tilde", r.theta_tilde}};
}

inline json rank_refresh_payload(const RankpctTable& t) { return {{"rankpct", t}}; }

inline json rank_drop_payload(int threshold, const std::vector<std::pair<std::string, std::string>>& arcs) {
    return {{"threshold", threshold}, {"arcs", arcs}};
}

struct LogContents {
    std::vector<Event> events;
    std::vector<std::string> warnings;
    std::size_t committed_bytes = 0;  // length of the valid prefix
};

// Parses a log. Malformed interior lines are errors with their line number;
// only a torn final line is tolerated.
inline LogContents read_events(std::istream& in) {
    LogContents out;
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    std::size_t pos = 0, line_no = 0;
    while (pos < text.size()) {
        ++line_no;
        const auto nl = text.find('\n', pos);
        const bool terminated = nl != std::string::npos;
        const std::string line = text.substr(pos, terminated ? nl - pos : std::string::npos);
        const bool last = !terminated || nl + 1 == text.size();
        if (line.empty()) {
            if (!terminated) break;
            pos = nl + 1;
            out.committed_bytes = pos;
            continue;
        }
        Event e;
        try {
            if (!terminated) throw data_error("unterminated record");
            const auto j = json::parse(line);
            e.seq = j.at("seq").get<long long>();
            e.ts = j.value("ts", "");
            e.type = j.at("type").get<std::string>();
            e.payload = j.at("payload");
        } catch (const std::exception& ex) {
            if (last) {
                out.warnings.push_back("ignoring torn final record at line " + std::to_string(line_no) + ": " + ex.what());
                break;
            }
            throw data_error(std::string("malformed event: ") + ex.what(), line_no);
        }
        if (!out.events.empty() && e.seq <= out.events.back().seq)
            throw data_error("event sequence not increasing", line_no);
        out.events.push_back(std::move(e));
        pos = nl + 1;
        out.committed_bytes = pos;
    }
    return out;
}

inline LogContents read_events(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return {};
    return read_events(in);
}

// Append-only writer. Each append is a single write() of one full line
// followed by fsync, so a record is durable when append returns.
class EventLog {
public:
    explicit EventLog(std::string path) : path_(std::move(path)) {
        auto existing = read_events(path_);
        warnings_ = existing.warnings;
        if (!existing.events.empty()) last_seq_ = existing.events.back().seq;
        fd_ = ::open(path_.c_str(), O_WRONLY | O_CREAT, 0644);
        if (fd_ < 0) throw data_error("cannot open event log '" + path_ + "': " + std::strerror(errno));
        struct stat st {};
        ::fstat(fd_, &st);
        if (static_cast<std::size_t>(st.st_size) > existing.committed_bytes) {
            // Drop the torn tail so the next record starts on a clean line.
            if (::ftruncate(fd_, static_cast<off_t>(existing.committed_bytes)) != 0)
                throw data_error("cannot truncate torn tail of '" + path_ + "'");
            ::fsync(fd_);
        }
        ::lseek(fd_, 0, SEEK_END);
    }
    EventLog(const EventLog&) = delete;
    EventLog& operator=(const EventLog&) = delete;
    ~EventLog() {
        if (fd_ >= 0) ::close(fd_);
    }

    long long append(const std::string& type, const json& payload) {
        Event e{last_seq_ + 1, detail::utc_timestamp(), type, payload};
        const std::string line = json{{"seq", e.seq}, {"ts", e.ts}, {"type", e.type}, {"payload", e.payload}}.dump() + "\n";
        std::size_t done = 0;
        while (done < line.size()) {
            const auto n = ::write(fd_, line.data() + done, line.size() - done);
            if (n < 0) {
                if (errno == EINTR) continue;
                throw data_error("event log write failed: " + std::string(std::strerror(errno)));
            }
            done += static_cast<std::size_t>(n);
        }
        if (::fsync(fd_) != 0) throw data_error("event log fsync failed: " + std::string(std::strerror(errno)));
        last_seq_ = e.seq;
        return e.seq;
    }

    long long last_seq() const { return last_seq_; }
    const std::string& path() const { return path_; }
    const std::vector<std::string>& warnings() const { return warnings_; }

private:
    std::string path_;
    int fd_ = -1;
    long long last_seq_ = 0;
    std::vector<std::string> warnings_;
};

// Applies one event to `s`. Snapshot events replace the state wholesale.
inline void apply_event(BanditState& s, const Event& e) {
    try {
        if (e.type == "round") {
            const auto& p = e.payload;
            apply_feedback(s, p.at("dest_id").get<std::string>(), p.at("t").get<long>(),
                           p.at("recommended").get<std::vector<std::string>>(),
                           p.at("selected").get<std::vector<std::string>>(),
                           parse_feedback_mode(p.value("mode", "not_selected")));
        } else if (e.type == "rank_refresh") {
            refresh_rankpct(s, e.payload.at("rankpct").get<RankpctTable>());
        } else if (e.type == "rank_drop") {
            apply_rank_drop(s, e.payload.at("arcs").get<std::vector<std::pair<std::string, std::string>>>());
        } else if (e.type == "snapshot") {
            s = state_from_json(e.payload);
        } else {
            throw data_error("unknown event type '" + e.type + "'");
        }
    } catch (const json::exception& ex) {
        throw data_error("event " + std::to_string(e.seq) + ": " + ex.what());
    } catch (const std::logic_error& ex) {  // unknown ids, stale rounds, bad values
        throw data_error("event " + std::to_string(e.seq) + ": " + ex.what());
    }
}

using EventObserver = std::function<void(const Event&, const BanditState& before, const BanditState& after)>;

inline BanditState replay(const std::vector<Event>& events, BanditState s0, const EventObserver& observe = {}) {
    for (const auto& e : events) {
        if (observe) {
            BanditState before = s0;
            apply_event(s0, e);
            observe(e, before, s0);
        } else {
            apply_event(s0, e);
        }
    }
    return s0;
}

inline BanditState replay(const std::string& log_path, BanditState s0) {
    return replay(read_events(log_path).events, std::move(s0));
}

}  // namespace geonet
