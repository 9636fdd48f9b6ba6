#include "pgar/data.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace fs = std::filesystem;

namespace pgar {

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return char(std::tolower(c)); });
  return s;
}

std::map<std::string, std::string> scan(const fs::path& dir, const std::set<std::string>& exts) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const auto ext = lower(e.path().extension().string());
    if (exts.count(ext)) out[e.path().stem().string()] = e.path().string();
  }
  return out;
}

fs::path find_dir(const fs::path& root, std::initializer_list<const char*> names) {
  for (const char* n : names) {
    if (fs::is_directory(root / n)) return root / n;
  }
  return root / *names.begin();
}

cv::Mat read_image(const std::string& path, int flags) {
  cv::Mat m = cv::imread(path, flags);
  if (m.empty()) throw InputError("cannot decode image " + path);
  return m;
}

Tensor<float> to_tensor(const cv::Mat& m) {
  cv::Mat f;
  m.convertTo(f, CV_32F);
  const int c = f.channels();
  Tensor<float> t(1, c, f.rows, f.cols);
  std::vector<cv::Mat> planes;
  cv::split(f, planes);
  for (int k = 0; k < c; ++k) {
    for (int y = 0; y < f.rows; ++y) std::copy_n(planes[std::size_t(k)].ptr<float>(y), f.cols, &t(0, k, y, 0));
  }
  return t;
}

Tensor<float> load_depth(const std::string& path, int size, DepthNorm norm) {
  cv::Mat raw = read_image(path, cv::IMREAD_ANYDEPTH | cv::IMREAD_GRAYSCALE);
  double scale = 1.0;
  if (raw.depth() == CV_8U) {
    scale = 1.0 / 255.0;
  } else if (raw.depth() == CV_16U) {
    scale = 1.0 / 65535.0;
  } else {
    throw InputError("depth map " + path + " must be 8- or 16-bit grayscale");
  }
  cv::Mat d;
  raw.convertTo(d, CV_32F, scale);
  if (norm == DepthNorm::minmax) {
    double lo = 0, hi = 0;
    cv::minMaxLoc(d, &lo, &hi);
    if (hi > lo) {
      d = (d - lo) / (hi - lo);
    } else {
      d.setTo(0.0f);
    }
  }
  if (d.rows != size || d.cols != size) cv::resize(d, d, cv::Size(size, size), 0, 0, cv::INTER_LINEAR);
  Tensor<float> t = to_tensor(d);
  t.array() = t.array().max(0.0f).min(1.0f);
  return t;
}

Tensor<float> load_rgb(const std::string& path, int size, int& h, int& w) {
  cv::Mat bgr = read_image(path, cv::IMREAD_COLOR);
  h = bgr.rows;
  w = bgr.cols;
  cv::Mat rgb;
  cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
  if (rgb.rows != size || rgb.cols != size) cv::resize(rgb, rgb, cv::Size(size, size), 0, 0, cv::INTER_LINEAR);
  Tensor<float> t = to_tensor(rgb);
  t.array() /= 255.0f;
  return t;
}

Tensor<float> load_gt(const std::string& path, int size) {
  cv::Mat g = read_image(path, cv::IMREAD_GRAYSCALE);
  if (g.rows != size || g.cols != size) cv::resize(g, g, cv::Size(size, size), 0, 0, cv::INTER_NEAREST);
  Tensor<float> t = to_tensor(g);
  t.array() = (t.array() >= 127.5f).cast<float>();
  return t;
}

template <typename F>
Tensor<float> map_planes(const Tensor<float>& t, F&& f) {
  if (t.empty()) return t;
  MatrixRM<float> probe = f(MatrixRM<float>(t.plane(0, 0)));
  Tensor<float> out(t.n(), t.c(), probe.rows(), probe.cols());
  for (Index n = 0; n < t.n(); ++n) {
    for (Index c = 0; c < t.c(); ++c) out.plane(n, c) = f(MatrixRM<float>(t.plane(n, c)));
  }
  return out;
}

struct SyntheticImages {
  cv::Mat rgb;  // BGR, 8-bit
  cv::Mat depth;
  cv::Mat gt;
};

SyntheticImages synthesize(int size, std::mt19937_64& rng, bool depth16) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  SyntheticImages out;
  const cv::Scalar bg(40 + 60 * u(rng), 40 + 60 * u(rng), 40 + 60 * u(rng));
  const cv::Scalar fg(160 + 90 * u(rng), 160 + 90 * u(rng), 120 + 130 * u(rng));
  out.rgb = cv::Mat(size, size, CV_8UC3, bg);
  out.gt = cv::Mat::zeros(size, size, CV_8U);
  const cv::Point center(int(size * (0.3 + 0.4 * u(rng))), int(size * (0.3 + 0.4 * u(rng))));
  const cv::Size axes(int(size * (0.12 + 0.15 * u(rng))), int(size * (0.12 + 0.15 * u(rng))));
  const double angle = 180.0 * u(rng);
  cv::ellipse(out.rgb, center, axes, angle, 0, 360, fg, cv::FILLED);
  cv::ellipse(out.gt, center, axes, angle, 0, 360, cv::Scalar(255), cv::FILLED);
  cv::Mat noise(size, size, CV_8UC3);
  cv::RNG noise_rng(rng());
  noise_rng.fill(noise, cv::RNG::UNIFORM, cv::Scalar::all(0), cv::Scalar::all(16));
  out.rgb += noise;

  cv::Mat d(size, size, CV_32F);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) d.at<float>(y, x) = float(0.2 + 0.2 * double(y) / size);
  }
  d.setTo(0.8f, out.gt);
  if (depth16) {
    d.convertTo(out.depth, CV_16U, 65535.0);
  } else {
    d.convertTo(out.depth, CV_8U, 255.0);
  }
  return out;
}

}  // namespace

DatasetManifest load_dataset(const std::string& root, const std::string& split, bool require_depth) {
  const fs::path r(root);
  if (!fs::is_directory(r)) throw InputError("dataset root does not exist: " + root);
  const fs::path rgb_dir = find_dir(r, {"RGB", "rgb"});
  const fs::path depth_dir = find_dir(r, {"depth", "Depth"});
  const fs::path gt_dir = find_dir(r, {"GT", "gt"});
  for (const auto& d : {rgb_dir, gt_dir}) {
    if (!fs::is_directory(d)) throw InputError("missing dataset directory: " + d.string());
  }
  if (require_depth && !fs::is_directory(depth_dir)) {
    throw InputError("missing dataset directory: " + depth_dir.string());
  }
  const auto rgbs = scan(rgb_dir, {".jpg", ".jpeg", ".png", ".bmp"});
  const auto gts = scan(gt_dir, {".png", ".bmp", ".jpg"});
  std::map<std::string, std::string> depths;
  if (fs::is_directory(depth_dir)) depths = scan(depth_dir, {".png", ".bmp", ".jpg", ".tiff", ".tif"});

  std::set<std::string> ids;
  for (const auto* m : {&rgbs, &gts}) {
    for (const auto& [id, path] : *m) ids.insert(id);
  }
  if (require_depth) {
    for (const auto& [id, path] : depths) ids.insert(id);
  }
  if (ids.empty()) throw InputError("dataset " + root + " is empty");

  DatasetManifest man{root, split, {}};
  std::vector<std::string> problems;
  for (const auto& id : ids) {
    std::string missing;
    auto need = [&](const std::map<std::string, std::string>& m, const char* what) {
      if (!m.count(id)) missing += std::string(missing.empty() ? "" : ", ") + what;
    };
    need(rgbs, "RGB");
    if (require_depth) need(depths, "depth");
    need(gts, "GT");
    if (!missing.empty()) {
      problems.push_back(id + " (missing " + missing + ")");
      continue;
    }
    man.entries.push_back({id, rgbs.at(id), depths.count(id) ? depths.at(id) : "", gts.at(id)});
  }
  if (!problems.empty()) {
    std::string msg = "incomplete samples in " + root + ":";
    for (const auto& p : problems) msg += "\n  " + p;
    throw InputError(msg);
  }
  return man;
}

void write_manifest(const std::string& path, const DatasetManifest& manifest) {
  std::ofstream os(path);
  if (!os) throw Error("cannot write manifest " + path);
  os << "# root=" << manifest.root << " split=" << manifest.split << "\n";
  for (const auto& e : manifest.entries) {
    os << e.id << '\t' << e.rgb_path << '\t' << e.depth_path << '\t' << e.gt_path << '\n';
  }
}

DatasetManifest read_manifest(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw InputError("cannot read manifest " + path);
  DatasetManifest m;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream hs(line.substr(1));
      std::string tok;
      while (hs >> tok) {
        if (tok.rfind("root=", 0) == 0) m.root = tok.substr(5);
        if (tok.rfind("split=", 0) == 0) m.split = tok.substr(6);
      }
      continue;
    }
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string item;
    while (std::getline(ss, item, '\t')) f.push_back(item);
    if (f.size() != 4) throw InputError("malformed manifest line: " + line);
    m.entries.push_back({f[0], f[1], f[2], f[3]});
  }
  return m;
}

Sample prepare_sample(const ManifestEntry& entry, int target_size, DepthNorm norm) {
  Sample s;
  s.id = entry.id;
  s.rgb = load_rgb(entry.rgb_path, target_size, s.original_height, s.original_width);
  if (!entry.depth_path.empty()) s.depth = load_depth(entry.depth_path, target_size, norm);
  s.gt = load_gt(entry.gt_path, target_size);
  return s;
}

Sample prepare_inputs(const std::string& rgb_path, const std::string& depth_path, int target_size, DepthNorm norm) {
  Sample s;
  s.id = fs::path(rgb_path).stem().string();
  s.rgb = load_rgb(rgb_path, target_size, s.original_height, s.original_width);
  if (!depth_path.empty()) s.depth = load_depth(depth_path, target_size, norm);
  return s;
}

Sample apply_transform(const Sample& s, bool flip, int quarter_turns) {
  const int turns = ((quarter_turns % 4) + 4) % 4;
  auto f = [&](MatrixRM<float> p) -> MatrixRM<float> {
    if (flip) p = p.rowwise().reverse().eval();
    for (int k = 0; k < turns; ++k) p = p.transpose().colwise().reverse().eval();
    return p;
  };
  Sample out = s;
  out.rgb = map_planes(s.rgb, f);
  out.depth = map_planes(s.depth, f);
  out.gt = map_planes(s.gt, f);
  return out;
}

Sample augment(const Sample& s, std::mt19937_64& rng) {
  std::bernoulli_distribution flip(0.5);
  std::uniform_int_distribution<int> turns(0, 3);
  const bool f = flip(rng);
  const int t = turns(rng);
  return apply_transform(s, f, t);
}

Batch make_batch(const std::vector<Sample>& samples) {
  if (samples.empty()) throw InputError("empty batch");
  const Shape rs = samples.front().rgb.shape();
  Batch b;
  b.rgb = Tensor<float>(Index(samples.size()), 3, rs.h, rs.w);
  const bool with_depth = !samples.front().depth.empty();
  const bool with_gt = !samples.front().gt.empty();
  if (with_depth) b.depth = Tensor<float>(Index(samples.size()), 1, rs.h, rs.w);
  if (with_gt) b.gt = Tensor<float>(Index(samples.size()), 1, rs.h, rs.w);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    if (s.rgb.h() != rs.h || s.rgb.w() != rs.w) throw InputError("batch samples differ in size");
    const auto n = Index(i);
    b.ids.push_back(s.id);
    for (Index c = 0; c < 3; ++c) {
      b.rgb.plane(n, c) = ((s.rgb.plane(0, c).array() - kRgbMean[c]) / kRgbStd[c]).matrix();
    }
    if (with_depth) b.depth.plane(n, 0) = s.depth.plane(0, 0);
    if (with_gt) b.gt.plane(n, 0) = s.gt.plane(0, 0);
  }
  return b;
}

void write_synthetic_dataset(const std::string& root, int count, int size, std::uint64_t seed, bool depth16) {
  const fs::path r(root);
  for (const char* d : {"RGB", "depth", "GT"}) fs::create_directories(r / d);
  std::mt19937_64 rng(seed);
  for (int i = 0; i < count; ++i) {
    char id[32];
    std::snprintf(id, sizeof(id), "syn_%04d", i);
    auto imgs = synthesize(size, rng, depth16);
    cv::imwrite((r / "RGB" / (std::string(id) + ".png")).string(), imgs.rgb);
    cv::imwrite((r / "depth" / (std::string(id) + ".png")).string(), imgs.depth);
    cv::imwrite((r / "GT" / (std::string(id) + ".png")).string(), imgs.gt);
  }
}

std::vector<Sample> synthetic_samples(int count, int size, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Sample> out;
  for (int i = 0; i < count; ++i) {
    auto imgs = synthesize(size, rng, false);
    Sample s;
    char id[32];
    std::snprintf(id, sizeof(id), "syn_%04d", i);
    s.id = id;
    s.original_height = s.original_width = size;
    cv::Mat rgb;
    cv::cvtColor(imgs.rgb, rgb, cv::COLOR_BGR2RGB);
    s.rgb = to_tensor(rgb);
    s.rgb.array() /= 255.0f;
    s.depth = to_tensor(imgs.depth);
    s.depth.array() /= 255.0f;
    s.gt = to_tensor(imgs.gt);
    s.gt.array() = (s.gt.array() >= 127.5f).cast<float>();
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace pgar
