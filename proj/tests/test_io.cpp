#include <gtest/gtest.h>

#include <fstream>
#include <random>

#include "hvs5m/io.hpp"
#include "support/tempdir.hpp"

using namespace hvs;
using namespace hvs::io;
using testutil::TempDir;

namespace {

std::string format_tag(const std::vector<std::uint8_t>& bytes) {
  try {
    decode(bytes);
  } catch (const FormatError& e) {
    return e.kind();
  }
  return "accepted";
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

}  // namespace

TEST(Hvsf, ExactByteLayout) {
  const auto bytes = encode(TensorU8({2}, {7, 9}));
  const std::vector<std::uint8_t> expected{'H', 'V', 'S', 'F', 1, 0, 3, 1, 2, 0, 0, 0, 0, 0, 0, 0, 7, 9};
  EXPECT_EQ(bytes, expected);
  const auto f = encode(TensorF({1, 1}, {1.0f}));
  const std::vector<std::uint8_t> expected_f{'H', 'V', 'S', 'F', 1, 0, 1, 2, 1, 0, 0, 0, 0, 0, 0, 0,
                                             1, 0, 0, 0, 0, 0, 0, 0, 0x00, 0x00, 0x80, 0x3F};
  EXPECT_EQ(f, expected_f);
  const auto d = encode(TensorD({1}, {-2.0}));
  EXPECT_EQ(d[6], 2);
  EXPECT_EQ(d.back(), 0xC0);
}

TEST(Hvsf, RoundTripEveryDtype) {
  std::mt19937_64 rng(1);
  TensorF f({3, 4});
  for (auto& v : f.data()) v = static_cast<float>(rng() % 1000) / 7.0f;
  TensorD d({2, 2, 2});
  for (auto& v : d.data()) v = static_cast<double>(rng()) / 3.0;
  TensorU8 u({5});
  for (auto& v : u.data()) v = static_cast<std::uint8_t>(rng());
  EXPECT_EQ(std::get<TensorF>(decode(encode(f))), f);
  EXPECT_EQ(std::get<TensorD>(decode(encode(d))), d);
  EXPECT_EQ(std::get<TensorU8>(decode(encode(u))), u);
}

TEST(Hvsf, SpecialFloatsSurviveBitForBit) {
  TensorF f({4}, {-0.0f, std::numeric_limits<float>::infinity(), std::numeric_limits<float>::denorm_min(), std::nanf("")});
  const auto back = std::get<TensorF>(decode(encode(f)));
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(std::bit_cast<std::uint32_t>(back[i]), std::bit_cast<std::uint32_t>(f[i]));
}

TEST(Hvsf, RejectsMalformedInput) {
  const auto good = encode(TensorF({2, 3}));
  EXPECT_EQ(format_tag({}), "format:truncated");
  EXPECT_EQ(format_tag(std::vector<std::uint8_t>(good.begin(), good.end() - 1)), "format:truncated");
  EXPECT_EQ(format_tag(std::vector<std::uint8_t>(good.begin(), good.begin() + 12)), "format:truncated");
  auto bad = good;
  bad[0] = 'X';
  EXPECT_EQ(format_tag(bad), "format:bad-magic");
  bad = good;
  bad[4] = 2;
  EXPECT_EQ(format_tag(bad), "format:bad-version");
  bad = good;
  bad[6] = 9;
  EXPECT_EQ(format_tag(bad), "format:bad-dtype");
  bad = good;
  bad[7] = 0;
  EXPECT_EQ(format_tag(bad), "format:bad-rank");
  bad = good;
  bad[8] = 0;
  EXPECT_EQ(format_tag(bad), "format:bad-shape");
  bad = good;
  bad.push_back(0);
  EXPECT_EQ(format_tag(bad), "format:trailing-bytes");
}

TEST(Hvsf, FileWriteIsAtomicAndReadable) {
  TempDir dir;
  const auto path = dir / "t.hvsf";
  write_tensor(path, TensorF({2}, {1, 2}));
  write_tensor(path, TensorF({3}, {4, 5, 6}), true);
  EXPECT_EQ(read_tensor_as<float>(path), TensorF({3}, {4, 5, 6}));
  EXPECT_EQ(read_tensor_as<double>(path).shape(), Shape{3});
  std::size_t entries = 0;
  for (const auto& e : fs::directory_iterator(dir.path())) {
    (void)e;
    ++entries;
  }
  EXPECT_EQ(entries, 1u);
  EXPECT_THROW(read_tensor(dir / "missing.hvsf"), IoError);
}

TEST(Hvsf, ReadErrorNamesTheFile) {
  TempDir dir;
  write_text(dir / "bad.hvsf", "HVSX");
  try {
    read_tensor(dir / "bad.hvsf");
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("bad.hvsf"), std::string::npos);
  }
}

TEST(Manifest, ParsesRecordsAndResolvesPaths) {
  TempDir dir;
  fs::create_directories(dir / "frames");
  write_tensor(dir / "c.hvsf", TensorF({1, 1, 1, 2048}));
  const std::string text =
      "# demo\n"
      "mos_range: 1 5\n"
      "\n"
      "video: a\n"
      "frames: frames   # trailing comment\n"
      "mos: 3.5\n"
      "content: c.hvsf\n"
      "video: b\n"
      "mos_range: 0 100\n"
      "mos: 42\n";
  write_text(dir / "m.txt", text);
  const auto m = load_manifest(dir / "m.txt");
  ASSERT_EQ(m.videos.size(), 2u);
  EXPECT_EQ(m.videos[0].id, "a");
  EXPECT_EQ(*m.videos[0].frames_dir, dir / "frames");
  EXPECT_EQ(*m.videos[0].content, dir / "c.hvsf");
  EXPECT_EQ(m.videos[0].mos_high, 5.0);
  EXPECT_EQ(m.videos[1].mos_high, 100.0);
  EXPECT_EQ(m.find("b").mos, 42.0);
  EXPECT_THROW(m.find("zzz"), InvalidArgumentError);
}

TEST(Manifest, ErrorsCarryLineNumbers) {
  auto line_of = [](const std::string& text) -> std::size_t {
    try {
      parse_manifest(text, "mem.txt");
    } catch (const ParseError& e) {
      return e.line();
    }
    return 0;
  };
  EXPECT_EQ(line_of("mos_range: 1 5\nvideo: a\nmos: 2\nvideo: a\nmos: 2\n"), 4u);  // duplicate id
  EXPECT_EQ(line_of("mos_range: 1 5\nvideo: a\n"), 2u);                          // missing mos
  EXPECT_EQ(line_of("video: a\nmos: 2\n"), 1u);                                   // no range
  EXPECT_EQ(line_of("mos_range: 1 5\nvideo: a\nmos: 9\n"), 2u);                  // outside range
  EXPECT_EQ(line_of("mos_range: 1 5\nvideo: a\nmos: 2\ncolour: red\n"), 4u);     // unknown key
  EXPECT_EQ(line_of("mos_range: 1 5\nvideo: a\nmos: x\n"), 3u);                  // bad number
  EXPECT_EQ(line_of("mos_range: 5 1\n"), 1u);
  EXPECT_EQ(line_of("# nothing\n"), 1u);
}

TEST(Manifest, DanglingPathIsNamed) {
  try {
    parse_manifest("mos_range: 1 5\nvideo: a\nmos: 2\nmotion: nowhere/m.hvsf\n", "/tmp/x/m.txt");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("nowhere/m.hvsf"), std::string::npos);
  }
}

TEST(Frames, RawPackedAndPlanarAgree) {
  TempDir dir;
  const std::size_t h = 2, w = 3, n = 2;
  std::string packed, planar;
  for (std::size_t f = 0; f < n; ++f) {
    std::string planes[3];
    for (std::size_t p = 0; p < h * w; ++p)
      for (std::size_t c = 0; c < 3; ++c) {
        const char v = static_cast<char>(f * 100 + p * 10 + c);
        packed.push_back(v);
        planes[c].push_back(v);
      }
    planar += planes[0] + planes[1] + planes[2];
  }
  write_text(dir / "v.rgb", packed);
  write_text(dir / "v.rgbp", planar);
  VideoRecord r;
  r.id = "v";
  r.height = h;
  r.width = w;
  r.num_frames = n;
  r.raw_video = dir / "v.rgb";
  const auto a = load_frames(r);
  r.raw_video = dir / "v.rgbp";
  r.raw_format = "rgbp";
  const auto b = load_frames(r);
  ASSERT_EQ(a.size(), 2u);
  EXPECT_EQ(a[0], b[0]);
  EXPECT_EQ(a[1], b[1]);
  EXPECT_EQ(a[1](1, 2, 1), 100.0f + 50 + 1);
  r.num_frames = 3;
  EXPECT_THROW(load_frames(r), IoError);
}

TEST(Frames, DirectoryInLexicographicOrder) {
  TempDir dir;
  write_tensor(dir / "f1.hvsf", TensorU8({4, 4, 3}, 1));
  write_tensor(dir / "f0.hvsf", TensorU8({4, 4, 3}, 0));
  write_text(dir / "notes.txt", "ignored");
  VideoRecord r;
  r.frames_dir = dir.path();
  const auto f = load_frames(r);
  ASSERT_EQ(f.size(), 2u);
  EXPECT_EQ(f[0][0], 0.0f);
  EXPECT_EQ(f[1][0], 1.0f);
  write_tensor(dir / "f2.hvsf", TensorU8({5, 4, 3}, 0));
  EXPECT_THROW(load_frames(r), DimensionError);
}

TEST(Checkpoint, RoundTripAndShapeMismatch) {
  TempDir dir;
  Checkpoint c;
  c.params = head::HeadParams<float>::init({16, 8, 4}, 3);
  c.temphyst = {5, 0.25};
  c.pooling = head::Pooling::Mean;
  c.seed = 99;
  c.epoch = 7;
  c.input_mean.assign(16, 0.5f);
  c.input_scale.assign(16, 2.0f);
  c.config_text = "temphyst.tau = 5\n";
  write_checkpoint(dir / "ck", c);
  const Checkpoint back = read_checkpoint(dir / "ck");
  for (std::size_t k = 0; k < head::HeadParams<float>::kCount; ++k)
    EXPECT_EQ(*back.params.tensors()[k], *c.params.tensors()[k]);
  EXPECT_EQ(back.temphyst.tau, 5u);
  EXPECT_EQ(back.temphyst.gamma, 0.25);
  EXPECT_EQ(back.pooling, head::Pooling::Mean);
  EXPECT_EQ(back.seed, 99u);
  EXPECT_EQ(back.epoch, 7u);
  EXPECT_EQ(back.input_scale, c.input_scale);
  EXPECT_EQ(back.config_text, c.config_text);

  write_tensor(dir / "ck" / "gru.weight_hh.hvsf", TensorF({12, 5}));
  try {
    read_checkpoint(dir / "ck");
    FAIL();
  } catch (const DimensionError& e) {
    EXPECT_NE(std::string(e.what()).find("gru.weight_hh"), std::string::npos);
  }
}
