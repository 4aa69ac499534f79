#pragma once

// Durable trial storage: one append-only JSON-lines event log per trial.
//
// Line 1 creates the trial (its config); every later line is one outcome.
// A line is fsync'd before the mutation is acknowledged. A torn final line
// (crash mid-write) is dropped on load; any other unreadable line is an error.

#include <fcntl.h>
#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <shared_mutex>
#include <sstream>
#include <string>
#include <vector>

#include <openssl/evp.h>

#include "ewoc/errors.hpp"
#include "ewoc/json_io.hpp"
#include "ewoc/trial.hpp"

namespace ewoc {

inline std::string rfc3339_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday,
                tm.tm_hour, tm.tm_min, tm.tm_sec, static_cast<int>(ms));
  return buf;
}

inline std::string sha256_hex(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("sha256 failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

struct AuditEntry {
  std::string timestamp;
  std::string action;
  std::string digest;  ///< sha256 of the event payload
};

struct TrialSummary {
  std::string id;
  std::size_t patients = 0;
  TrialStatus status = TrialStatus::ReadyToDose;
  std::size_t revision = 0;
  std::string updated;
};

struct StoredTrial {
  std::string id;
  TrialState state;
  std::size_t revision = 0;  ///< number of recorded outcomes
  std::vector<AuditEntry> audit;
};

/// What GET .../recommendation reports for one revision.
struct RecommendationView {
  std::size_t revision = 0;
  TrialStatus status = TrialStatus::ReadyToDose;
  std::optional<DoseRecommendation> recommendation;  ///< only when ReadyToDose
  std::optional<double> pending_dose;                ///< only when AwaitingOutcome
  MtdEstimate estimate;                               ///< interim unless Complete
};

namespace detail {

inline void write_durably(const std::filesystem::path& path, const std::string& line, bool create) {
  const int flags = O_WRONLY | O_APPEND | O_CLOEXEC | (create ? O_CREAT | O_EXCL : 0);
  const int fd = ::open(path.c_str(), flags, 0644);
  if (fd < 0) throw std::runtime_error("cannot open " + path.string());
  std::size_t off = 0;
  while (off < line.size()) {
    const ssize_t n = ::write(fd, line.data() + off, line.size() - off);
    if (n < 0) {
      ::close(fd);
      throw std::runtime_error("write failed for " + path.string());
    }
    off += static_cast<std::size_t>(n);
  }
  const int rc = ::fsync(fd);
  ::close(fd);
  if (rc != 0) throw std::runtime_error("fsync failed for " + path.string());
  if (create) {
    const int dfd = ::open(path.parent_path().c_str(), O_RDONLY | O_DIRECTORY | O_CLOEXEC);
    if (dfd >= 0) {
      ::fsync(dfd);
      ::close(dfd);
    }
  }
}

inline std::string random_id() {
  static std::mutex m;
  static std::random_device rd;
  std::lock_guard lock(m);
  std::string id;
  static const char* hex = "0123456789abcdef";
  for (int i = 0; i < 4; ++i) {
    const auto word = rd();
    for (int k = 0; k < 4; ++k) id += hex[(word >> (4 * k)) & 15];
  }
  return id;
}

}  // namespace detail

class TrialStore {
 public:
  explicit TrialStore(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
    for (const auto& entry : std::filesystem::directory_iterator(dir_)) {
      if (entry.path().extension() != ".log") continue;
      auto t = load(entry.path());
      const auto id = t->trial.id;
      trials_.emplace(id, std::move(t));
    }
  }

  const std::filesystem::path& directory() const noexcept { return dir_; }

  /// Validates, persists at revision 0, and returns the new id.
  std::string create(const TrialConfig& config) {
    validate(config);
    auto entry = std::make_shared<Entry>();
    const json payload = to_json(config);
    const std::string ts = rfc3339_now();
    std::unique_lock lock(map_mutex_);
    std::string id;
    do id = detail::random_id();
    while (trials_.count(id));
    json line{{"type", "created"}, {"ts", ts}, {"id", id}, {"config", payload}};
    detail::write_durably(path_of(id), line.dump() + "\n", true);
    entry->trial = {id, new_trial(config), 0, {{ts, "create", sha256_hex(payload.dump())}}};
    trials_.emplace(id, std::move(entry));
    return id;
  }

  std::vector<TrialSummary> list() const {
    std::shared_lock lock(map_mutex_);
    std::vector<TrialSummary> out;
    for (const auto& [id, e] : trials_) {
      std::shared_lock tl(e->mutex);
      out.push_back({id, e->trial.state.size(), e->trial.state.status(), e->trial.revision,
                     e->trial.audit.empty() ? "" : e->trial.audit.back().timestamp});
    }
    return out;
  }

  StoredTrial get(const std::string& id) const {
    auto e = find(id);
    std::shared_lock lock(e->mutex);
    return e->trial;
  }

  /// Read-only; memoized by revision.
  RecommendationView recommendation(const std::string& id) const {
    auto e = find(id);
    TrialState state;
    std::size_t revision = 0;
    {
      std::shared_lock lock(e->mutex);
      state = e->trial.state;
      revision = e->trial.revision;
    }
    {
      std::lock_guard memo(e->memo_mutex);
      if (e->memo && e->memo->revision == revision) return *e->memo;
    }
    RecommendationView view = compute_view(state, revision);
    std::lock_guard memo(e->memo_mutex);
    if (!e->memo || e->memo->revision < revision) e->memo = view;
    return view;
  }

  /// Record one outcome. Throws RevisionConflict when `expected_revision` is
  /// stale, SequencingError when the trial is complete, IntegrityError when the
  /// dose is not the one prescribed. Returns the new revision once durable.
  std::size_t post_outcome(const std::string& id, double dose, int dlt, std::size_t expected_revision) {
    auto e = find(id);
    std::unique_lock lock(e->mutex);
    if (expected_revision != e->trial.revision) throw RevisionConflict(expected_revision, e->trial.revision);
    TrialState next = record_outcome(e->trial.state, dose, dlt);
    const auto& stored = next.records().back();
    const std::size_t revision = e->trial.revision + 1;
    const std::string ts = rfc3339_now();
    const json payload{{"revision", revision}, {"dose", stored.dose}, {"dlt", stored.dlt}};
    json line{{"type", "outcome"}, {"ts", ts}, {"revision", revision}, {"dose", stored.dose}, {"dlt", stored.dlt}};
    detail::write_durably(path_of(id), line.dump() + "\n", false);
    e->trial.state = std::move(next);
    e->trial.revision = revision;
    e->trial.audit.push_back({ts, "outcome", sha256_hex(payload.dump())});
    return revision;
  }

 private:
  struct Entry {
    mutable std::shared_mutex mutex;
    StoredTrial trial;
    mutable std::mutex memo_mutex;
    mutable std::optional<RecommendationView> memo;
  };

  std::filesystem::path path_of(const std::string& id) const { return dir_ / (id + ".log"); }

  std::shared_ptr<Entry> find(const std::string& id) const {
    std::shared_lock lock(map_mutex_);
    auto it = trials_.find(id);
    if (it == trials_.end()) throw NotFoundError("no trial with id " + id);
    return it->second;
  }

  static RecommendationView compute_view(const TrialState& state, std::size_t revision) {
    RecommendationView view;
    view.revision = revision;
    view.status = state.status();
    const auto& config = state.config();
    Recommender r(config);
    for (const auto& rec : state.records()) r.add(rec);
    if (view.status == TrialStatus::ReadyToDose) {
      view.recommendation = r.recommend();
      view.estimate = detail::estimate_from(config, state.records(), view.recommendation->posterior);
    } else {
      const double alpha = feasibility_alpha(config.feasibility, state.records());
      view.estimate = detail::estimate_from(config, state.records(), r.posterior(alpha));
      if (view.status == TrialStatus::AwaitingOutcome) view.pending_dose = current_cohort_dose(state);
    }
    return view;
  }

  /// Rebuild one trial from its log, truncating a torn final line.
  static std::shared_ptr<Entry> load(const std::filesystem::path& path) {
    std::string content;
    {
      std::ifstream in(path, std::ios::binary);
      std::ostringstream ss;
      ss << in.rdbuf();
      content = ss.str();
    }
    const auto last_newline = content.rfind('\n');
    const std::size_t complete = last_newline == std::string::npos ? 0 : last_newline + 1;
    if (complete < content.size()) {
      std::filesystem::resize_file(path, complete);
      content.resize(complete);
    }
    if (content.empty()) throw IntegrityError(path.string() + ": empty trial log");

    auto entry = std::make_shared<Entry>();
    std::istringstream lines(content);
    std::string line;
    std::size_t lineno = 0;
    std::vector<ToxicityRecord> records;
    TrialConfig config;
    while (std::getline(lines, line)) {
      ++lineno;
      json ev;
      try {
        ev = json::parse(line);
      } catch (const json::exception& ex) {
        throw IntegrityError(path.string() + ":" + std::to_string(lineno) + ": " + ex.what());
      }
      const auto type = ev.value("type", "");
      const auto ts = ev.value("ts", "");
      if (lineno == 1) {
        if (type != "created" || !ev.contains("config") || !ev.contains("id"))
          throw IntegrityError(path.string() + ": first event must create the trial");
        config = trial_config_from_json(ev["config"]);
        entry->trial.id = ev["id"].get<std::string>();
        entry->trial.audit.push_back({ts, "create", sha256_hex(ev["config"].dump())});
        continue;
      }
      if (type != "outcome" || ev.value("revision", std::size_t{0}) != records.size() + 1)
        throw IntegrityError(path.string() + ":" + std::to_string(lineno) + ": out-of-sequence event");
      const ToxicityRecord rec{ev.at("dose").get<double>(), ev.at("dlt").get<int>()};
      records.push_back(rec);
      const json payload{{"revision", records.size()}, {"dose", rec.dose}, {"dlt", rec.dlt}};
      entry->trial.audit.push_back({ts, "outcome", sha256_hex(payload.dump())});
    }
    entry->trial.state = replay(config, records);
    entry->trial.revision = records.size();
    return entry;
  }

  std::filesystem::path dir_;
  mutable std::shared_mutex map_mutex_;
  std::map<std::string, std::shared_ptr<Entry>> trials_;
};

}  // namespace ewoc
