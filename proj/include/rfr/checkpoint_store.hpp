#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "rfr/types.hpp"

namespace rfr {

/// Cyber-physical snapshot of one subsystem: the state estimate plus the ADS
/// flags at save time.
struct Checkpoint {
  Micros t{0};
  Vector x_hat;
  std::vector<int> ads_flags;
};

struct ControlRecord {
  Micros t{0};
  Vector u;
};

struct RetrievedRange {
  std::vector<Checkpoint> checkpoints;
  std::vector<Micros> save_times;
  std::vector<ControlRecord> controls;
};

using Tag = std::array<std::uint8_t, 32>;

/// Environment variable consulted for the integrity key.
inline constexpr const char* kStoreKeyEnv = "RFR_STORE_KEY";

/// Key from RFR_STORE_KEY, or the built-in default (not secret) when unset.
std::string resolve_store_key();

/// Append-only per-subsystem logs of checkpoints, save times and applied
/// controls. Every record carries tag_i = HMAC-SHA256(key, payload_i || tag_{i-1}),
/// one chain per (subsystem, log).
///
/// Persistence: records are written as [u32 length][payload][32-byte tag],
/// little-endian. Payload layout:
///   u8 kind (0 anchor, 1 checkpoint, 2 save time, 3 control)
///   u16 id length, id bytes
///   anchor:     u8 chain kind
///   checkpoint: i64 t_us, u32 n, n x f64, u32 m, m x u8 flags
///   save time:  i64 t_us
///   control:    i64 t_us, u32 n, n x f64
/// An anchor record holds the tag that seeds a chain whose prefix was pruned.
///
/// Removing a suffix of a chain is not detectable from the tags alone.
class SecureStore {
 public:
  explicit SecureStore(std::string key = resolve_store_key());

  SecureStore(const SecureStore&) = delete;
  SecureStore& operator=(const SecureStore&) = delete;
  SecureStore(SecureStore&& other) noexcept;
  SecureStore& operator=(SecureStore&& other) noexcept;

  /// Appends the checkpoint and its save time together. ContractError unless
  /// cp.t is strictly after the previous save time.
  void append_checkpoint(const std::string& subsystem, const Checkpoint& cp);
  /// ContractError unless rec.t is strictly after the previous control.
  void append_control(const std::string& subsystem, const ControlRecord& rec);

  /// Records with t in [from, to). Verifies the subsystem's chains first and
  /// throws IntegrityError if any tag mismatches.
  RetrievedRange retrieve(const std::string& subsystem, Micros from, Micros to) const;

  bool verify_integrity() const;

  std::vector<Micros> save_times(const std::string& subsystem) const;
  std::vector<std::string> subsystems() const;
  std::size_t control_count(const std::string& subsystem) const;
  std::size_t checkpoint_count(const std::string& subsystem) const;

  /// Drops control records older than cutoff; the last dropped tag becomes the
  /// chain anchor.
  void prune_controls_before(const std::string& subsystem, Micros cutoff);

  void save(const std::filesystem::path& path) const;
  /// Parses a persisted store. Tags are kept as read; call verify_integrity()
  /// to validate them. Throws std::runtime_error on malformed files.
  static SecureStore load(const std::filesystem::path& path, std::string key = resolve_store_key());

 private:
  struct Entry {
    std::vector<std::uint8_t> payload;
    Tag tag{};
  };
  struct Chain {
    Tag anchor{};
    std::vector<Entry> entries;
  };
  struct SubsystemLog {
    Chain checkpoint_chain;
    Chain save_time_chain;
    Chain control_chain;
    std::vector<Checkpoint> checkpoints;
    std::vector<Micros> save_times;
    std::vector<ControlRecord> controls;
  };

  Tag chain_tag(const Tag& prev, const std::vector<std::uint8_t>& payload) const;
  void extend(Chain& chain, std::vector<std::uint8_t> payload);
  bool verify_chain(const Chain& chain) const;
  bool verify_log(const SubsystemLog& log) const;

  std::string key_;
  std::map<std::string, SubsystemLog> logs_;
  mutable std::mutex mutex_;
};

}  // namespace rfr
