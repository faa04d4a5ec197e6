#include <gtest/gtest.h>

#include <algorithm>
#include <cstring>
#include <fstream>
#include <set>

#include "authformer/data_io.hpp"
#include "authformer/error.hpp"
#include "test_util.hpp"

using namespace authformer;
using authformer::testing::TempDir;
using authformer::testing::values;

namespace {

const std::filesystem::path kGolden = AUTHFORMER_GOLDEN_DIR;

std::string bytes_of(std::initializer_list<int> xs) {
  std::string s;
  for (int x : xs) s.push_back(static_cast<char>(x));
  return s;
}

template <typename F>
std::string expect_throw_message(F&& f) {
  try {
    f();
  } catch (const std::exception& e) {
    return e.what();
  }
  ADD_FAILURE() << "expected an exception";
  return "";
}

SynthConfig small_synth() {
  SynthConfig c;
  c.num_classes = 3;
  c.samples_per_class = 6;
  c.image_size = 8;
  c.sequence_length = 16;
  return c;
}

}  // namespace

TEST(Blob, HandWrittenBytes) {
  std::string out;
  const std::vector<float> f{1.0f, -2.0f};
  append_blob(out, {2}, f);
  EXPECT_EQ(out, "ATF1" + bytes_of({0, 1, 0, 0, 0, 2, 0, 0, 0, 0x00, 0x00, 0x80, 0x3F, 0x00, 0x00, 0x00, 0xC0}));

  std::string out64;
  const std::vector<double> d{0.5};
  append_blob(out64, {1, 1}, d);
  EXPECT_EQ(out64, "ATF1" + bytes_of({1, 2, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0xE0, 0x3F}));
}

TEST(Blob, GoldenFilesDecodeAndReencode) {
  const auto f32 = read_file(kGolden / "blob_f32.atf");
  std::size_t off = 0;
  const auto a = decode_blob(f32, off, "blob_f32.atf");
  EXPECT_EQ(off, f32.size());
  EXPECT_EQ(a.type, ElementType::F32);
  EXPECT_EQ(a.shape, (Shape{2, 3}));
  EXPECT_EQ(a.values, (std::vector<double>{0.0, 1.0, -1.5, 0.25, static_cast<double>(1e-3f), 65504.0}));
  std::string again;
  const std::vector<float> narrowed(a.values.begin(), a.values.end());
  append_blob(again, a.shape, narrowed);
  EXPECT_EQ(again, f32);

  const auto f64 = read_file(kGolden / "blob_f64.atf");
  off = 0;
  const auto b = decode_blob(f64, off, "blob_f64.atf");
  EXPECT_EQ(b.type, ElementType::F64);
  EXPECT_EQ(b.values, (std::vector<double>{0.1, -1e300}));
  std::string again64;
  append_blob(again64, b.shape, b.values);
  EXPECT_EQ(again64, f64);
}

TEST(Blob, Rejections) {
  const auto good = read_file(kGolden / "blob_f32.atf");
  std::size_t off = 0;
  auto bad_magic = good;
  bad_magic[0] = 'X';
  EXPECT_THROW(decode_blob(bad_magic, off, "x"), FormatError);
  off = 0;
  const auto msg = expect_throw_message([&] { decode_blob(good.substr(0, good.size() - 3), off, "face.atf"); });
  EXPECT_NE(msg.find("face.atf"), std::string::npos);
  EXPECT_NE(msg.find("truncated"), std::string::npos);
  off = 0;
  auto bad_type = good;
  bad_type[4] = 7;
  EXPECT_THROW(decode_blob(bad_type, off, "x"), FormatError);
  std::string out;
  const std::vector<float> three(3);
  EXPECT_THROW(append_blob(out, {2, 2}, three), ShapeError);
}

TEST(Crc32, StandardCheckValue) {
  EXPECT_EQ(crc32("123456789"), 0xCBF43926u);
  EXPECT_EQ(crc32(""), 0u);
}

TEST(Checkpoint, GoldenFileDecodesAndReencodesIdentically) {
  const auto bytes = read_file(kGolden / "checkpoint_v1.afck");
  const auto ck = decode_checkpoint<float>(bytes, "checkpoint_v1.afck");
  EXPECT_EQ(ck.config.num_classes, 3u);
  EXPECT_EQ(ck.config.model_dim, 8u);
  EXPECT_EQ(ck.config.tcn.dilations, (std::vector<std::size_t>{1, 2}));
  ASSERT_EQ(ck.params.size(), 2u);
  EXPECT_EQ(values(ck.params.get("head.bias")), (std::vector<float>{0.5f, -1.0f, 2.25f}));
  EXPECT_EQ(ck.params.get("w").shape(), (Shape{2, 2}));
  EXPECT_EQ(values(ck.params.get("w")), (std::vector<float>{1.0f, -2.0f, 0.125f, 3.5f}));
  EXPECT_EQ(encode_checkpoint(ck.config, ck.params), bytes);
  // widening on load
  const auto wide = decode_checkpoint<double>(bytes, "checkpoint_v1.afck");
  EXPECT_EQ(values(wide.params.get("w")), (std::vector<double>{1.0, -2.0, 0.125, 3.5}));
}

TEST(Checkpoint, CorruptionIsDetected) {
  const auto bytes = read_file(kGolden / "checkpoint_v1.afck");
  for (std::size_t pos : {std::size_t{10}, bytes.size() / 2, bytes.size() - 9}) {
    auto flipped = bytes;
    flipped[pos] = static_cast<char>(flipped[pos] ^ 0x01);
    EXPECT_THROW(decode_checkpoint<float>(flipped, "c"), ChecksumError) << "byte " << pos;
  }
  auto magic = bytes;
  magic[1] = 'Z';
  EXPECT_THROW(decode_checkpoint<float>(magic, "c"), FormatError);
  EXPECT_THROW(decode_checkpoint<float>(bytes.substr(0, 6), "c"), FormatError);
  EXPECT_THROW(decode_checkpoint<float>(bytes.substr(0, bytes.size() - 1), "c"), ChecksumError);

  // a well-formed file from a future version
  auto future = bytes.substr(0, bytes.size() - 4);
  future[4] = 2;
  const auto crc = crc32(future);
  for (int i = 0; i < 4; ++i) future.push_back(static_cast<char>((crc >> (8 * i)) & 0xFF));
  EXPECT_THROW(decode_checkpoint<float>(future, "c"), UnsupportedVersionError);
}

TEST(Checkpoint, ModelRoundTripIsBitwise) {
  TempDir dir("afck");
  for (int seed : {1, 2}) {
    AuthFormer<float> model(ModelConfig::tiny(), seed);
    const auto path = dir / ("m" + std::to_string(seed) + ".afck");
    save_checkpoint(model, path);
    const auto loaded = load_checkpoint<float>(path);
    ASSERT_EQ(loaded.params().size(), model.params().size());
    for (std::size_t i = 0; i < model.params().size(); ++i) {
      EXPECT_EQ(loaded.params().entries()[i].first, model.params().entries()[i].first);
      const auto a = values(model.params().entries()[i].second), b = values(loaded.params().entries()[i].second);
      EXPECT_EQ(0, std::memcmp(a.data(), b.data(), a.size() * sizeof(float)));
    }
    EXPECT_EQ(read_file(path), encode_checkpoint(loaded.config(), loaded.params()));
  }
  EXPECT_THROW(load_checkpoint<float>(dir / "missing.afck"), IoError);
}

TEST(Dataset, GenerateSaveLoadIsExact) {
  TempDir dir("afds");
  const auto ds = generate_synthetic(small_synth());
  save_dataset(ds, dir.path());
  const auto back = load_dataset(dir.path());
  EXPECT_EQ(back.manifest.labels, ds.manifest.labels);
  EXPECT_EQ(back.manifest.split, ds.manifest.split);
  EXPECT_EQ(back.manifest.to_json(), ds.manifest.to_json());
  for (auto tag : kAllModalities) EXPECT_EQ(back.values.at(tag), ds.values.at(tag));
  const auto s = back.sample<double>(4, {Modality::Voice, Modality::Face});
  ASSERT_EQ(s.images.size(), 1u);
  EXPECT_EQ(s.images[0].pixels.shape(), (Shape{8, 8, 1}));
  EXPECT_EQ(s.sequence->values.shape(), (Shape{16}));
}

TEST(Dataset, RegenerationIsByteIdentical) {
  TempDir a("afds_a"), b("afds_b");
  save_dataset(generate_synthetic(small_synth()), a.path());
  save_dataset(generate_synthetic(small_synth()), b.path());
  for (const auto& name : {"manifest.json", "face.atf", "fingerprint.atf", "palmprint.atf", "voice.atf"})
    EXPECT_EQ(read_file(a / name), read_file(b / name)) << name;
  auto other = small_synth();
  other.seed = 43;
  EXPECT_NE(generate_synthetic(other).values.at(Modality::Face), generate_synthetic(small_synth()).values.at(Modality::Face));
}

TEST(Dataset, LoadRejections) {
  TempDir dir("afds_bad");
  save_dataset(generate_synthetic(small_synth()), dir.path());
  EXPECT_THROW(load_dataset(dir / "nope"), IoError);

  auto manifest = nlohmann::json::parse(read_file(dir / "manifest.json"));
  const auto original = manifest.dump();
  manifest["modalities"][0]["tag"] = "iris";
  write_file_atomic(dir / "manifest.json", manifest.dump());
  EXPECT_THROW(load_dataset(dir.path()), ValidationError);

  write_file_atomic(dir / "manifest.json", original);
  auto face = read_file(dir / "face.atf");
  write_file_atomic(dir / "face.atf", face.substr(0, face.size() - 10));
  const auto msg = expect_throw_message([&] { load_dataset(dir.path()); });
  EXPECT_NE(msg.find("face.atf"), std::string::npos) << msg;

  face[0] = 'B';
  write_file_atomic(dir / "face.atf", face);
  EXPECT_THROW(load_dataset(dir.path()), FormatError);
}

TEST(Dataset, NoiseFreeSamplesRepeatWithinClass) {
  auto c = small_synth();
  c.noise_level = 0.0;
  const auto ds = generate_synthetic(c);
  for (auto tag : kAllModalities) {
    const auto first = ds.raw(tag, 0), second = ds.raw(tag, 5);
    EXPECT_TRUE(std::equal(first.begin(), first.end(), second.begin()));
    const auto other = ds.raw(tag, 6);
    EXPECT_FALSE(std::equal(first.begin(), first.end(), other.begin()));
  }
}

TEST(Dataset, ValuesStayInRange) {
  auto c = small_synth();
  c.noise_level = 2.0;
  const auto ds = generate_synthetic(c);
  for (auto tag : kAllModalities) {
    const auto [lo, hi] = std::minmax_element(ds.values.at(tag).begin(), ds.values.at(tag).end());
    EXPECT_GE(*lo, is_image(tag) ? 0.0f : -1.0f);
    EXPECT_LE(*hi, 1.0f);
  }
  auto one = small_synth();
  one.num_classes = 1;
  EXPECT_THROW(generate_synthetic(one), ValidationError);
}

TEST(Split, StratifiedDisjointExhaustiveDeterministic) {
  std::vector<std::size_t> labels;
  for (std::size_t c = 0; c < 8; ++c)
    for (int s = 0; s < 40; ++s) labels.push_back(c);
  const auto a = split_dataset(labels, 8, 0.25, 42);
  const auto b = split_dataset(labels, 8, 0.25, 42);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.test, b.test);
  EXPECT_EQ(a.train.size(), 240u);
  EXPECT_EQ(a.test.size(), 80u);
  std::set<std::size_t> all(a.train.begin(), a.train.end());
  for (auto id : a.test) EXPECT_TRUE(all.insert(id).second) << "id " << id << " on both sides";
  EXPECT_EQ(all.size(), labels.size());
  std::vector<int> per_class(8);
  for (auto id : a.test) ++per_class[labels[id]];
  for (int n : per_class) EXPECT_EQ(n, 10);
  EXPECT_NE(split_dataset(labels, 8, 0.25, 7).test, a.test);
}

TEST(Split, Rejections) {
  const std::vector<std::size_t> labels{0, 0, 1};
  const auto msg = expect_throw_message([&] { split_dataset(labels, 2, 0.25, 1); });
  EXPECT_NE(msg.find("class 1"), std::string::npos);
  const std::vector<std::size_t> ok{0, 0, 1, 1};
  EXPECT_THROW(split_dataset(ok, 2, 0.0, 1), ValidationError);
  EXPECT_THROW(split_dataset(ok, 2, 1.0, 1), ValidationError);
  const auto tiny = split_dataset(ok, 2, 0.25, 1);
  EXPECT_EQ(tiny.test.size(), 2u);
}
