#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "rfr/checkpoint_store.hpp"

using namespace rfr;

namespace {

Micros s(double sec) { return from_seconds(sec); }

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("rfr_store_test_" + name);
}

SecureStore sample_store() {
  SecureStore st("unit-test-key");
  for (int k = 0; k < 50; ++k) {
    const Micros t = s(0.1 * k);
    if (k % 10 == 0) st.append_checkpoint("outer", {t, Vector::Constant(3, k), {0, 0, 0}});
    st.append_control("outer", {t, Vector::Constant(2, 0.5 * k)});
  }
  return st;
}

std::vector<char> read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const std::filesystem::path& p, const std::vector<char>& b) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out.write(b.data(), static_cast<std::streamsize>(b.size()));
}

}  // namespace

TEST(Store, FirstCheckpoint) {
  SecureStore st("k");
  st.append_checkpoint("outer", {Micros{0}, Vector::Zero(3), {0, 0, 0}});
  EXPECT_EQ(st.checkpoint_count("outer"), 1u);
  EXPECT_EQ(st.save_times("outer"), std::vector<Micros>{Micros{0}});
}

TEST(Store, RepeatedTimeRejected) {
  SecureStore st("k");
  st.append_checkpoint("outer", {s(1.0), Vector::Zero(3), {0, 0, 0}});
  EXPECT_THROW(st.append_checkpoint("outer", {s(1.0), Vector::Zero(3), {0, 0, 0}}), ContractError);
  st.append_control("outer", {s(1.0), Vector::Zero(2)});
  EXPECT_THROW(st.append_control("outer", {s(0.9), Vector::Zero(2)}), ContractError);
}

TEST(Store, ControlCountAndOrder) {
  SecureStore st("k");
  for (int k = 0; k < 1000; ++k) st.append_control("inner-1", {Micros{k * 10000}, Vector::Constant(1, k)});
  EXPECT_EQ(st.control_count("inner-1"), 1000u);
  const RetrievedRange r = st.retrieve("inner-1", Micros{0}, s(100));
  ASSERT_EQ(r.controls.size(), 1000u);
  for (int k = 0; k < 1000; ++k) EXPECT_EQ(r.controls[static_cast<std::size_t>(k)].u(0), k);
}

TEST(Store, RetrieveHalfOpenRange) {
  const SecureStore st = sample_store();
  const RetrievedRange r = st.retrieve("outer", s(3.0), s(3.5));
  ASSERT_EQ(r.checkpoints.size(), 1u);
  EXPECT_EQ(r.checkpoints.front().t, s(3.0));
  EXPECT_EQ(r.save_times, std::vector<Micros>{s(3.0)});
  ASSERT_EQ(r.controls.size(), 5u);
  EXPECT_EQ(r.controls.front().t, s(3.0));
  EXPECT_EQ(r.controls.back().t, s(3.4));
}

TEST(Store, EmptyAndInvertedRanges) {
  const SecureStore st = sample_store();
  const RetrievedRange r = st.retrieve("outer", s(2.0), s(2.0));
  EXPECT_TRUE(r.checkpoints.empty() && r.controls.empty() && r.save_times.empty());
  EXPECT_THROW(st.retrieve("outer", s(3.0), s(2.0)), ContractError);
}

TEST(Store, SaveTimesMatchCheckpoints) {
  const SecureStore st = sample_store();
  const RetrievedRange r = st.retrieve("outer", Micros{0}, s(100));
  ASSERT_EQ(r.save_times.size(), r.checkpoints.size());
  for (std::size_t i = 0; i < r.save_times.size(); ++i) EXPECT_EQ(r.save_times[i], r.checkpoints[i].t);
}

TEST(Store, FreshStoreVerifies) {
  EXPECT_TRUE(SecureStore("k").verify_integrity());
  EXPECT_TRUE(sample_store().verify_integrity());
}

TEST(Store, PersistenceRoundTrip) {
  const auto path = temp_file("roundtrip.bin");
  sample_store().save(path);
  const SecureStore back = SecureStore::load(path, "unit-test-key");
  EXPECT_TRUE(back.verify_integrity());
  EXPECT_EQ(back.save_times("outer"), sample_store().save_times("outer"));
  EXPECT_EQ(back.control_count("outer"), 50u);
  std::filesystem::remove(path);
}

TEST(Store, FlippedByteFailsVerification) {
  const auto path = temp_file("tamper.bin");
  sample_store().save(path);
  std::vector<char> bytes = read_bytes(path);
  bytes[bytes.size() / 2] ^= 0x01;
  write_bytes(path, bytes);
  bool detected = false;
  try {
    const SecureStore back = SecureStore::load(path, "unit-test-key");
    detected = !back.verify_integrity();
    EXPECT_THROW(back.retrieve("outer", Micros{0}, s(100)), IntegrityError);
  } catch (const std::runtime_error&) {
    detected = true;  // the flip landed in a length field
  }
  EXPECT_TRUE(detected);
  std::filesystem::remove(path);
}

TEST(Store, EveryPayloadByteIsCovered) {
  SecureStore st("k");
  st.append_checkpoint("outer", {s(1.0), Vector::Constant(3, 2.0), {1, 0, 0}});
  const auto path = temp_file("every.bin");
  st.save(path);
  const std::vector<char> clean = read_bytes(path);
  for (std::size_t i = 4; i < clean.size(); ++i) {
    std::vector<char> b = clean;
    b[i] ^= 0x40;
    write_bytes(path, b);
    try {
      EXPECT_FALSE(SecureStore::load(path, "k").verify_integrity()) << "byte " << i;
    } catch (const std::runtime_error&) {
    }
  }
  std::filesystem::remove(path);
}

TEST(Store, TruncatedTailStillVerifies) {
  const auto path = temp_file("trunc.bin");
  SecureStore st("k");
  st.append_control("outer", {s(0.0), Vector::Zero(2)});
  st.save(path);
  const auto one = std::filesystem::file_size(path);
  st.append_control("outer", {s(0.1), Vector::Zero(2)});
  st.save(path);
  std::filesystem::resize_file(path, one);
  const SecureStore back = SecureStore::load(path, "k");
  EXPECT_TRUE(back.verify_integrity());
  EXPECT_EQ(back.control_count("outer"), 1u);
  std::filesystem::remove(path);
}

TEST(Store, WrongKeyFailsVerification) {
  const auto path = temp_file("key.bin");
  sample_store().save(path);
  EXPECT_FALSE(SecureStore::load(path, "other-key").verify_integrity());
  std::filesystem::remove(path);
}

TEST(Store, PruningKeepsChainVerifiable) {
  SecureStore st = sample_store();
  st.prune_controls_before("outer", s(3.0));
  EXPECT_TRUE(st.verify_integrity());
  EXPECT_EQ(st.control_count("outer"), 20u);
  const auto path = temp_file("prune.bin");
  st.save(path);
  const SecureStore back = SecureStore::load(path, "unit-test-key");
  EXPECT_TRUE(back.verify_integrity());
  EXPECT_EQ(back.retrieve("outer", s(3.0), s(3.5)).controls.size(), 5u);
  std::filesystem::remove(path);
}

TEST(Store, KeyFromEnvironment) {
  ::setenv(kStoreKeyEnv, "from-env", 1);
  EXPECT_EQ(resolve_store_key(), "from-env");
  ::unsetenv(kStoreKeyEnv);
  EXPECT_FALSE(resolve_store_key().empty());
}
