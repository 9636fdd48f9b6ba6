#include "pgar/data.hpp"

#include <doctest.h>

#include <opencv2/imgcodecs.hpp>

#include <filesystem>
#include <fstream>
#include <random>

using namespace pgar;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path = fs::temp_directory_path() / ("pgar_" + tag + "_" + std::to_string(rd()));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  std::string str() const { return path.string(); }
};

Sample random_sample(int h, int w, std::mt19937_64& rng) {
  std::uniform_real_distribution<float> u(0, 1);
  Sample s;
  s.id = "r";
  s.rgb = Tensor<float>(1, 3, h, w);
  s.depth = Tensor<float>(1, 1, h, w);
  s.gt = Tensor<float>(1, 1, h, w);
  for (Index i = 0; i < s.rgb.size(); ++i) s.rgb.data()[i] = u(rng);
  for (Index i = 0; i < s.depth.size(); ++i) s.depth.data()[i] = u(rng);
  for (Index i = 0; i < s.gt.size(); ++i) s.gt.data()[i] = u(rng) > 0.5f ? 1.0f : 0.0f;
  return s;
}

bool same(const Tensor<float>& a, const Tensor<float>& b) {
  return a.shape() == b.shape() && (a.array() == b.array()).all();
}

bool same(const Sample& a, const Sample& b) { return same(a.rgb, b.rgb) && same(a.depth, b.depth) && same(a.gt, b.gt); }

}  // namespace

TEST_CASE("load_dataset matches triples by basename") {
  TempDir dir("load");
  write_synthetic_dataset(dir.str(), 3, 40, 1);
  const auto man = load_dataset(dir.str());
  REQUIRE(man.entries.size() == 3);
  CHECK(man.entries[0].id == "syn_0000");
  CHECK(man.entries[2].id == "syn_0002");
  CHECK(fs::path(man.entries[1].depth_path).parent_path().filename() == "depth");

  SUBCASE("one missing depth file names its id") {
    fs::remove(dir.path / "depth" / "syn_0001.png");
    CHECK_THROWS_WITH_AS(load_dataset(dir.str()), doctest::Contains("syn_0001 (missing depth)"), InputError);
    CHECK(load_dataset(dir.str(), "test", false).entries.size() == 3);
  }
  SUBCASE("every unmatched id is listed") {
    fs::remove(dir.path / "GT" / "syn_0000.png");
    fs::remove(dir.path / "RGB" / "syn_0002.png");
    try {
      load_dataset(dir.str());
      FAIL("expected an error");
    } catch (const InputError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("syn_0000 (missing GT)") != std::string::npos);
      CHECK(msg.find("syn_0002 (missing RGB)") != std::string::npos);
    }
  }
  SUBCASE("missing GT directory names the path") {
    fs::remove_all(dir.path / "GT");
    CHECK_THROWS_WITH_AS(load_dataset(dir.str()), doctest::Contains((dir.path / "GT").string().c_str()), InputError);
  }
  SUBCASE("empty dataset") {
    for (const char* d : {"RGB", "depth", "GT"}) {
      fs::remove_all(dir.path / d);
      fs::create_directories(dir.path / d);
    }
    CHECK_THROWS_WITH_AS(load_dataset(dir.str()), doctest::Contains("empty"), InputError);
  }
  CHECK_THROWS_AS(load_dataset((dir.path / "nope").string()), InputError);
}

TEST_CASE("manifest round trip") {
  TempDir dir("manifest");
  write_synthetic_dataset(dir.str(), 4, 32, 2);
  const auto man = load_dataset(dir.str(), "train");
  const auto file = (dir.path / "manifest.tsv").string();
  write_manifest(file, man);
  const auto back = read_manifest(file);
  CHECK(back.root == man.root);
  CHECK(back.split == "train");
  REQUIRE(back.entries.size() == man.entries.size());
  for (std::size_t i = 0; i < man.entries.size(); ++i) {
    CHECK(back.entries[i].id == man.entries[i].id);
    CHECK(back.entries[i].rgb_path == man.entries[i].rgb_path);
    CHECK(back.entries[i].depth_path == man.entries[i].depth_path);
    CHECK(back.entries[i].gt_path == man.entries[i].gt_path);
  }
  CHECK_THROWS_AS(read_manifest((dir.path / "absent.tsv").string()), InputError);
}

TEST_CASE("prepare_sample resizes and normalizes") {
  TempDir dir("prepare");
  for (const char* d : {"RGB", "depth", "GT"}) fs::create_directories(dir.path / d);
  cv::Mat rgb(480, 640, CV_8UC3, cv::Scalar(10, 200, 255));
  cv::Mat gt(480, 640, CV_8UC1, cv::Scalar(0));
  gt(cv::Rect(100, 100, 200, 150)).setTo(255);
  cv::imwrite((dir.path / "RGB" / "a.png").string(), rgb);
  cv::imwrite((dir.path / "GT" / "a.png").string(), gt);

  SUBCASE("640x480 to 352x352 with binary gt") {
    cv::imwrite((dir.path / "depth" / "a.png").string(), cv::Mat(480, 640, CV_8UC1, cv::Scalar(0)));
    const auto s = prepare_sample(load_dataset(dir.str()).entries.at(0));
    CHECK(s.rgb.shape() == Shape{1, 3, 352, 352});
    CHECK(s.depth.shape() == Shape{1, 1, 352, 352});
    CHECK(s.gt.shape() == Shape{1, 1, 352, 352});
    CHECK(s.original_height == 480);
    CHECK(s.original_width == 640);
    CHECK((s.depth.array() == 0).all());
    CHECK(((s.gt.array() == 0) || (s.gt.array() == 1)).all());
    CHECK(s.gt.array().sum() > 0);
    // Channels are in RGB order and scaled to [0, 1].
    CHECK(s.rgb(0, 0, 10, 10) == doctest::Approx(1.0));
    CHECK(s.rgb(0, 2, 10, 10) == doctest::Approx(10.0 / 255.0));
  }
  SUBCASE("16-bit depth divides by 65535") {
    cv::Mat d(480, 640, CV_16UC1, cv::Scalar(1000));
    d(cv::Rect(0, 0, 320, 480)).setTo(65535);
    cv::imwrite((dir.path / "depth" / "a.png").string(), d);
    const auto s = prepare_sample(load_dataset(dir.str()).entries.at(0), 64);
    CHECK(s.depth.array().maxCoeff() == 1.0f);
    CHECK(s.depth(0, 0, 5, 60) == doctest::Approx(1000.0 / 65535.0));
    const auto mm = prepare_sample(load_dataset(dir.str()).entries.at(0), 64, DepthNorm::minmax);
    CHECK(mm.depth.array().minCoeff() == 0.0f);
    CHECK(mm.depth.array().maxCoeff() == doctest::Approx(1.0));
  }
  SUBCASE("undecodable file names the path") {
    std::ofstream((dir.path / "depth" / "a.png").string()) << "not an image";
    CHECK_THROWS_WITH_AS(prepare_sample(load_dataset(dir.str()).entries.at(0)), doctest::Contains("a.png"),
                         InputError);
  }
}

TEST_CASE("geometric transforms") {
  std::mt19937_64 rng(3);
  const auto s = random_sample(6, 6, rng);
  CHECK(same(apply_transform(s, false, 0), s));
  CHECK(same(apply_transform(apply_transform(s, false, 1), false, 1), apply_transform(s, false, 2)));
  CHECK(same(apply_transform(apply_transform(s, false, 2), false, 2), s));
  CHECK(same(apply_transform(apply_transform(s, true, 0), true, 0), s));

  // Asymmetric pattern: a single marked pixel must move identically in
  // every array.
  Sample m;
  m.rgb = Tensor<float>(1, 3, 4, 5);
  m.depth = Tensor<float>(1, 1, 4, 5);
  m.gt = Tensor<float>(1, 1, 4, 5);
  m.rgb(0, 1, 0, 1) = 1;
  m.depth(0, 0, 0, 1) = 1;
  m.gt(0, 0, 0, 1) = 1;
  const auto f = apply_transform(m, true, 0);
  CHECK(f.rgb(0, 1, 0, 3) == 1);
  CHECK(f.depth(0, 0, 0, 3) == 1);
  CHECK(f.gt(0, 0, 0, 3) == 1);
  // A counter-clockwise quarter turn sends (row 0, col 1) of a 4x5 map to
  // (row 3, col 0) of the 5x4 result.
  const auto r = apply_transform(m, false, 1);
  CHECK(r.gt.shape() == Shape{1, 1, 5, 4});
  CHECK(r.gt(0, 0, 3, 0) == 1);
  CHECK(r.depth(0, 0, 3, 0) == 1);
  CHECK(r.rgb(0, 1, 3, 0) == 1);

  SUBCASE("augment permutes pixel values and keeps gt binary") {
    for (int trial = 0; trial < 16; ++trial) {
      const auto a = augment(s, rng);
      auto sorted = [](const Tensor<float>& t) {
        std::vector<float> v(t.data(), t.data() + t.size());
        std::sort(v.begin(), v.end());
        return v;
      };
      CHECK(sorted(a.rgb) == sorted(s.rgb));
      CHECK(sorted(a.depth) == sorted(s.depth));
      CHECK(sorted(a.gt) == sorted(s.gt));
    }
    std::mt19937_64 r1(9), r2(9);
    CHECK(same(augment(s, r1), augment(s, r2)));
  }
}

TEST_CASE("make_batch standardizes rgb and stacks samples") {
  std::mt19937_64 rng(4);
  auto a = random_sample(8, 8, rng), b = random_sample(8, 8, rng);
  b.id = "b";
  const auto batch = make_batch({a, b});
  CHECK(batch.rgb.shape() == Shape{2, 3, 8, 8});
  CHECK(batch.ids == std::vector<std::string>{"r", "b"});
  for (Index c = 0; c < 3; ++c) {
    CHECK(batch.rgb(1, c, 2, 3) == doctest::Approx((b.rgb(0, c, 2, 3) - kRgbMean[c]) / kRgbStd[c]));
  }
  CHECK(batch.depth(1, 0, 4, 4) == b.depth(0, 0, 4, 4));
  CHECK(batch.gt(0, 0, 7, 7) == a.gt(0, 0, 7, 7));
  CHECK_THROWS_AS(make_batch({}), InputError);
  CHECK_THROWS_AS(make_batch({a, random_sample(4, 4, rng)}), InputError);
}

TEST_CASE("synthetic data") {
  const auto s = synthetic_samples(3, 32, 5);
  REQUIRE(s.size() == 3);
  for (const auto& x : s) {
    CHECK(x.rgb.shape() == Shape{1, 3, 32, 32});
    CHECK(x.gt.array().sum() > 0);
    CHECK(x.gt.array().sum() < 32 * 32);
    CHECK(x.depth.array().maxCoeff() <= 1);
    CHECK(x.depth.array().minCoeff() >= 0);
  }
  const auto again = synthetic_samples(3, 32, 5);
  CHECK(same(s[2], again[2]));

  TempDir dir("synth16");
  write_synthetic_dataset(dir.str(), 2, 32, 6, true);
  const auto depth = cv::imread((dir.path / "depth" / "syn_0000.png").string(), cv::IMREAD_UNCHANGED);
  CHECK(depth.depth() == CV_16U);
}
