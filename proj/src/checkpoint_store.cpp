#include "rfr/checkpoint_store.hpp"

#include <algorithm>
#include <bit>
#include <cstdlib>
#include <cstring>
#include <fstream>

#include <openssl/evp.h>
#include <openssl/hmac.h>

namespace rfr {

namespace {

constexpr const char* kDefaultKey = "rfr-default-integrity-key-do-not-use-in-production";

enum class RecordKind : std::uint8_t { anchor = 0, checkpoint = 1, save_time = 2, control = 3 };

class Writer {
 public:
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u16(std::uint16_t v) { put(v, 2); }
  void u32(std::uint32_t v) { put(v, 4); }
  void i64(std::int64_t v) { put(static_cast<std::uint64_t>(v), 8); }
  void f64(double v) { put(std::bit_cast<std::uint64_t>(v), 8); }
  void str(const std::string& s) {
    u16(static_cast<std::uint16_t>(s.size()));
    buf_.insert(buf_.end(), s.begin(), s.end());
  }
  void vec(const Vector& v) {
    u32(static_cast<std::uint32_t>(v.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) f64(v(i));
  }
  std::vector<std::uint8_t> take() { return std::move(buf_); }

 private:
  void put(std::uint64_t v, int bytes) {
    for (int i = 0; i < bytes; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> buf_;
};

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& buf) : buf_(buf) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(get(1)); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(get(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  std::int64_t i64() { return static_cast<std::int64_t>(get(8)); }
  double f64() { return std::bit_cast<double>(get(8)); }
  std::string str() {
    const std::size_t n = u16();
    need(n);
    std::string s(buf_.begin() + static_cast<std::ptrdiff_t>(pos_),
                  buf_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
    pos_ += n;
    return s;
  }
  Vector vec() {
    const std::uint32_t n = u32();
    need(static_cast<std::size_t>(n) * 8);
    Vector v(n);
    for (std::uint32_t i = 0; i < n; ++i) v(i) = f64();
    return v;
  }
  bool done() const { return pos_ == buf_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > buf_.size()) throw std::runtime_error("store record truncated");
  }
  std::uint64_t get(int bytes) {
    need(static_cast<std::size_t>(bytes));
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(buf_[pos_++]) << (8 * i);
    return v;
  }
  const std::vector<std::uint8_t>& buf_;
  std::size_t pos_ = 0;
};

std::vector<std::uint8_t> encode_checkpoint(const std::string& id, const Checkpoint& cp) {
  Writer w;
  w.u8(static_cast<std::uint8_t>(RecordKind::checkpoint));
  w.str(id);
  w.i64(cp.t.count());
  w.vec(cp.x_hat);
  w.u32(static_cast<std::uint32_t>(cp.ads_flags.size()));
  for (int f : cp.ads_flags) w.u8(static_cast<std::uint8_t>(f));
  return w.take();
}

std::vector<std::uint8_t> encode_save_time(const std::string& id, Micros t) {
  Writer w;
  w.u8(static_cast<std::uint8_t>(RecordKind::save_time));
  w.str(id);
  w.i64(t.count());
  return w.take();
}

std::vector<std::uint8_t> encode_control(const std::string& id, const ControlRecord& rec) {
  Writer w;
  w.u8(static_cast<std::uint8_t>(RecordKind::control));
  w.str(id);
  w.i64(rec.t.count());
  w.vec(rec.u);
  return w.take();
}

std::vector<std::uint8_t> encode_anchor(const std::string& id, RecordKind chain) {
  Writer w;
  w.u8(static_cast<std::uint8_t>(RecordKind::anchor));
  w.str(id);
  w.u8(static_cast<std::uint8_t>(chain));
  return w.take();
}

void write_record(std::ofstream& out, const std::vector<std::uint8_t>& payload, const Tag& tag) {
  Writer len;
  len.u32(static_cast<std::uint32_t>(payload.size()));
  const auto header = len.take();
  out.write(reinterpret_cast<const char*>(header.data()), static_cast<std::streamsize>(header.size()));
  out.write(reinterpret_cast<const char*>(payload.data()), static_cast<std::streamsize>(payload.size()));
  out.write(reinterpret_cast<const char*>(tag.data()), static_cast<std::streamsize>(tag.size()));
}

}  // namespace

std::string resolve_store_key() {
  if (const char* env = std::getenv(kStoreKeyEnv); env != nullptr && *env != '\0') return env;
  return kDefaultKey;
}

SecureStore::SecureStore(std::string key) : key_(std::move(key)) {}

SecureStore::SecureStore(SecureStore&& other) noexcept {
  std::lock_guard lock(other.mutex_);
  key_ = std::move(other.key_);
  logs_ = std::move(other.logs_);
}

SecureStore& SecureStore::operator=(SecureStore&& other) noexcept {
  if (this != &other) {
    std::scoped_lock lock(mutex_, other.mutex_);
    key_ = std::move(other.key_);
    logs_ = std::move(other.logs_);
  }
  return *this;
}

Tag SecureStore::chain_tag(const Tag& prev, const std::vector<std::uint8_t>& payload) const {
  std::vector<std::uint8_t> msg(payload);
  msg.insert(msg.end(), prev.begin(), prev.end());
  Tag out{};
  unsigned int len = 0;
  HMAC(EVP_sha256(), key_.data(), static_cast<int>(key_.size()), msg.data(), msg.size(), out.data(),
       &len);
  return out;
}

void SecureStore::extend(Chain& chain, std::vector<std::uint8_t> payload) {
  const Tag& prev = chain.entries.empty() ? chain.anchor : chain.entries.back().tag;
  Tag tag = chain_tag(prev, payload);
  chain.entries.push_back({std::move(payload), tag});
}

bool SecureStore::verify_chain(const Chain& chain) const {
  Tag prev = chain.anchor;
  for (const Entry& e : chain.entries) {
    if (chain_tag(prev, e.payload) != e.tag) return false;
    prev = e.tag;
  }
  return true;
}

bool SecureStore::verify_log(const SubsystemLog& log) const {
  return verify_chain(log.checkpoint_chain) && verify_chain(log.save_time_chain) &&
         verify_chain(log.control_chain);
}

void SecureStore::append_checkpoint(const std::string& subsystem, const Checkpoint& cp) {
  std::lock_guard lock(mutex_);
  SubsystemLog& log = logs_[subsystem];
  if (!log.save_times.empty() && cp.t <= log.save_times.back()) {
    throw ContractError(subsystem + ": checkpoint time must be strictly increasing");
  }
  extend(log.checkpoint_chain, encode_checkpoint(subsystem, cp));
  extend(log.save_time_chain, encode_save_time(subsystem, cp.t));
  log.checkpoints.push_back(cp);
  log.save_times.push_back(cp.t);
}

void SecureStore::append_control(const std::string& subsystem, const ControlRecord& rec) {
  std::lock_guard lock(mutex_);
  SubsystemLog& log = logs_[subsystem];
  if (!log.controls.empty() && rec.t <= log.controls.back().t) {
    throw ContractError(subsystem + ": control time must be strictly increasing");
  }
  extend(log.control_chain, encode_control(subsystem, rec));
  log.controls.push_back(rec);
}

RetrievedRange SecureStore::retrieve(const std::string& subsystem, Micros from, Micros to) const {
  require(from <= to, "retrieve: t_from must not exceed t_to");
  std::lock_guard lock(mutex_);
  RetrievedRange out;
  const auto it = logs_.find(subsystem);
  if (it == logs_.end()) return out;
  const SubsystemLog& log = it->second;
  if (!verify_log(log)) throw IntegrityError(subsystem + ": secure store integrity check failed");

  auto in_range = [&](Micros t) { return t >= from && t < to; };
  for (const Checkpoint& cp : log.checkpoints) {
    if (in_range(cp.t)) out.checkpoints.push_back(cp);
  }
  for (Micros t : log.save_times) {
    if (in_range(t)) out.save_times.push_back(t);
  }
  const auto first = std::lower_bound(log.controls.begin(), log.controls.end(), from,
                                      [](const ControlRecord& r, Micros t) { return r.t < t; });
  for (auto c = first; c != log.controls.end() && c->t < to; ++c) out.controls.push_back(*c);
  return out;
}

bool SecureStore::verify_integrity() const {
  std::lock_guard lock(mutex_);
  return std::all_of(logs_.begin(), logs_.end(),
                     [this](const auto& kv) { return verify_log(kv.second); });
}

std::vector<Micros> SecureStore::save_times(const std::string& subsystem) const {
  std::lock_guard lock(mutex_);
  const auto it = logs_.find(subsystem);
  return it == logs_.end() ? std::vector<Micros>{} : it->second.save_times;
}

std::vector<std::string> SecureStore::subsystems() const {
  std::lock_guard lock(mutex_);
  std::vector<std::string> ids;
  for (const auto& [id, _] : logs_) ids.push_back(id);
  return ids;
}

std::size_t SecureStore::control_count(const std::string& subsystem) const {
  std::lock_guard lock(mutex_);
  const auto it = logs_.find(subsystem);
  return it == logs_.end() ? 0 : it->second.controls.size();
}

std::size_t SecureStore::checkpoint_count(const std::string& subsystem) const {
  std::lock_guard lock(mutex_);
  const auto it = logs_.find(subsystem);
  return it == logs_.end() ? 0 : it->second.checkpoints.size();
}

void SecureStore::prune_controls_before(const std::string& subsystem, Micros cutoff) {
  std::lock_guard lock(mutex_);
  const auto it = logs_.find(subsystem);
  if (it == logs_.end()) return;
  SubsystemLog& log = it->second;
  std::size_t n = 0;
  while (n < log.controls.size() && log.controls[n].t < cutoff) ++n;
  if (n == 0) return;
  Chain& chain = log.control_chain;
  chain.anchor = chain.entries[n - 1].tag;
  chain.entries.erase(chain.entries.begin(), chain.entries.begin() + static_cast<std::ptrdiff_t>(n));
  log.controls.erase(log.controls.begin(), log.controls.begin() + static_cast<std::ptrdiff_t>(n));
}

void SecureStore::save(const std::filesystem::path& path) const {
  std::lock_guard lock(mutex_);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  const Tag zero{};
  auto write_chain = [&](const std::string& id, RecordKind kind, const Chain& chain) {
    if (chain.anchor != zero) write_record(out, encode_anchor(id, kind), chain.anchor);
    for (const Entry& e : chain.entries) write_record(out, e.payload, e.tag);
  };
  for (const auto& [id, log] : logs_) {
    write_chain(id, RecordKind::checkpoint, log.checkpoint_chain);
    write_chain(id, RecordKind::save_time, log.save_time_chain);
    write_chain(id, RecordKind::control, log.control_chain);
  }
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

SecureStore SecureStore::load(const std::filesystem::path& path, std::string key) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                        std::istreambuf_iterator<char>());
  SecureStore store(std::move(key));
  std::size_t pos = 0;
  while (pos < bytes.size()) {
    if (pos + 4 > bytes.size()) throw std::runtime_error(path.string() + ": truncated length field");
    std::uint32_t len = 0;
    for (int i = 0; i < 4; ++i) len |= static_cast<std::uint32_t>(bytes[pos + i]) << (8 * i);
    pos += 4;
    if (pos + len + 32 > bytes.size()) throw std::runtime_error(path.string() + ": truncated record");
    Entry e;
    e.payload.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                     bytes.begin() + static_cast<std::ptrdiff_t>(pos + len));
    pos += len;
    std::copy_n(bytes.begin() + static_cast<std::ptrdiff_t>(pos), 32, e.tag.begin());
    pos += 32;

    Reader r(e.payload);
    const auto kind = static_cast<RecordKind>(r.u8());
    const std::string id = r.str();
    SubsystemLog& log = store.logs_[id];
    switch (kind) {
      case RecordKind::anchor: {
        const auto chain = static_cast<RecordKind>(r.u8());
        Chain* target = chain == RecordKind::checkpoint ? &log.checkpoint_chain
                        : chain == RecordKind::save_time ? &log.save_time_chain
                                                         : &log.control_chain;
        target->anchor = e.tag;
        continue;
      }
      case RecordKind::checkpoint: {
        Checkpoint cp;
        cp.t = Micros{r.i64()};
        cp.x_hat = r.vec();
        const std::uint32_t m = r.u32();
        for (std::uint32_t i = 0; i < m; ++i) cp.ads_flags.push_back(r.u8());
        log.checkpoints.push_back(std::move(cp));
        log.checkpoint_chain.entries.push_back(std::move(e));
        break;
      }
      case RecordKind::save_time:
        log.save_times.push_back(Micros{r.i64()});
        log.save_time_chain.entries.push_back(std::move(e));
        break;
      case RecordKind::control: {
        ControlRecord rec;
        rec.t = Micros{r.i64()};
        rec.u = r.vec();
        log.controls.push_back(std::move(rec));
        log.control_chain.entries.push_back(std::move(e));
        break;
      }
      default:
        throw std::runtime_error(path.string() + ": unknown record kind");
    }
  }
  return store;
}

}  // namespace rfr
