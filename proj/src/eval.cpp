#include "pgar/eval.hpp"

#include <opencv2/imgcodecs.hpp>

#include <cstdio>
#include <filesystem>
#include <iomanip>
#include <sstream>

namespace fs = std::filesystem;

namespace pgar {

namespace {

Map2d read_gt_original(const std::string& path) {
  const cv::Mat g = cv::imread(path, cv::IMREAD_GRAYSCALE);
  if (g.empty()) throw InputError("cannot decode ground truth " + path);
  Map2d out(g.rows, g.cols);
  for (int y = 0; y < g.rows; ++y) {
    const auto* row = g.ptr<std::uint8_t>(y);
    for (int x = 0; x < g.cols; ++x) out(y, x) = row[x] >= 128 ? 1.0 : 0.0;
  }
  return out;
}

Map2d quantize(const Map2d& map) { return to_8bit(map).cast<double>() / 255.0; }

Map2d gt_map(const Tensor<float>& gt) { return gt.plane(0, 0).cast<double>().array(); }

// Table-style number: three decimals without the leading zero.
std::string short_decimal(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  std::string s(buf);
  if (s.rfind("0.", 0) == 0) s.erase(0, 1);
  return s;
}

nlohmann::json curve_json(const PrCurve& c) {
  return {{"thresholds", kThresholds},
          {"precision", std::vector<double>(c.precision.begin(), c.precision.end())},
          {"recall", std::vector<double>(c.recall.begin(), c.recall.end())}};
}

}  // namespace

Map2d predict_saliency(const Model<float>& model, const Sample& sample) {
  const Batch b = make_batch({sample});
  const auto preds = forward(model, b.rgb, b.depth);
  return final_saliency(preds).data.plane(0, 0).cast<double>().array();
}

Map2d resize_map(const Map2d& map, int height, int width) {
  if (map.rows() == height && map.cols() == width) return map;
  Tensor<double> t(1, 1, map.rows(), map.cols());
  t.plane(0, 0) = map.matrix();
  const Tensor<double> r = resize_bilinear(t, height, width);
  return r.plane(0, 0).array();
}

Eigen::Array<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> to_8bit(const Map2d& map) {
  return (map * 255.0).round().max(0.0).min(255.0).cast<std::uint8_t>();
}

void write_map(const std::string& path, const Map2d& map) {
  const auto q = to_8bit(map);
  cv::Mat m(int(q.rows()), int(q.cols()), CV_8UC1);
  for (int y = 0; y < m.rows; ++y) {
    for (int x = 0; x < m.cols; ++x) m.at<std::uint8_t>(y, x) = q(y, x);
  }
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  if (!cv::imwrite(path, m)) throw InputError("cannot write map " + path);
}

DatasetReport evaluate_dataset(const Model<float>& model, const DatasetManifest& manifest, const EvalOptions& options,
                               const std::string& name) {
  if (manifest.entries.empty()) throw InputError("dataset " + manifest.root + " is empty");
  DatasetReport report;
  report.name = name;
  const int size = int(model.config.input_size);
  for (const auto& entry : manifest.entries) {
    const Sample s = prepare_sample(entry, size, options.depth_norm);
    const Map2d gt = read_gt_original(entry.gt_path);
    const Map2d pred = quantize(resize_map(predict_saliency(model, s), int(gt.rows()), int(gt.cols())));
    if (!options.maps_dir.empty()) write_map((fs::path(options.maps_dir) / (entry.id + ".png")).string(), pred);
    report.samples.push_back(evaluate_sample(pred, gt, options.metrics, entry.id));
  }
  report.result = aggregate(report.samples, options.metrics.beta2);
  return report;
}

DatasetReport evaluate_samples(const Model<float>& model, const std::vector<Sample>& samples, const EvalConfig& cfg,
                               const std::string& name) {
  DatasetReport report;
  report.name = name;
  for (const auto& s : samples) {
    report.samples.push_back(evaluate_sample(predict_saliency(model, s), gt_map(s.gt), cfg, s.id));
  }
  report.result = aggregate(report.samples, cfg.beta2);
  return report;
}

nlohmann::json report_json(const std::vector<DatasetReport>& reports, const nlohmann::json& meta) {
  nlohmann::json out;
  if (!meta.is_null()) out["meta"] = meta;
  out["columns"] = {"E_xi", "S_alpha", "F_beta", "M"};
  nlohmann::json datasets = nlohmann::json::array();
  for (const auto& r : reports) {
    nlohmann::json d;
    d["name"] = r.name;
    d["E_xi"] = r.result.e_measure;
    d["S_alpha"] = r.result.s_measure;
    d["F_beta"] = r.result.max_f;
    d["M"] = r.result.mae;
    d["samples"] = r.result.samples;
    d["excluded_from_pr"] = r.result.excluded;
    d["pr_curve"] = curve_json(r.result.pr_curve);
    nlohmann::json per = nlohmann::json::array();
    for (const auto& s : r.samples) {
      nlohmann::json e{{"id", s.id}, {"E_xi", s.e_measure}, {"S_alpha", s.s_measure}, {"M", s.mae}};
      e["F_beta"] = s.pr ? nlohmann::json(max_f_measure(*s.pr)) : nlohmann::json(nullptr);
      per.push_back(e);
    }
    d["per_sample"] = per;
    datasets.push_back(d);
  }
  out["datasets"] = datasets;
  out["note"] = kReproducibilityNote;
  return out;
}

std::string report_table(const std::vector<DatasetReport>& reports, const std::string& method) {
  std::ostringstream os;
  const int w0 = 10, w1 = 11, w2 = std::max<int>(8, int(method.size()) + 2);
  os << std::left << std::setw(w0) << "Dataset" << std::setw(w1) << "Metric" << std::right << std::setw(w2) << method
     << "\n";
  for (const auto& r : reports) {
    const std::pair<const char*, double> rows[] = {{"E_xi (up)", r.result.e_measure},
                                                   {"S_a (up)", r.result.s_measure},
                                                   {"F_b (up)", r.result.max_f},
                                                   {"M (down)", r.result.mae}};
    bool first = true;
    for (const auto& [label, v] : rows) {
      os << std::left << std::setw(w0) << (first ? r.name : "") << std::setw(w1) << label << std::right
         << std::setw(w2) << short_decimal(v) << "\n";
      first = false;
    }
  }
  os << "\n" << kReproducibilityNote << "\n";
  return os.str();
}

void infer_to_file(const Model<float>& model, const std::string& rgb_path, const std::string& depth_path,
                   const std::string& out_path, DepthNorm norm) {
  const bool needs_depth = !model.config.rgb_only;
  if (needs_depth && depth_path.empty()) {
    throw InputError("this model takes an RGB-D pair; a depth image is required");
  }
  const Sample s = prepare_inputs(rgb_path, needs_depth ? depth_path : "", int(model.config.input_size), norm);
  write_map(out_path, resize_map(predict_saliency(model, s), s.original_height, s.original_width));
}

}  // namespace pgar
