// craft: command-line front end for the detection toolkit.
//
// Exit codes: 0 success, 1 usage error, 2 data error.

#include <CLI11.hpp>

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <exception>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <random>
#include <thread>

#include "craft/craft.hpp"
#include "craft/json_io.hpp"
#include "png.hpp"

namespace fs = std::filesystem;
using namespace craft;

namespace {

struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Configs {
  SceneConfig scene;
  PostprocConfig postproc;
  RectifyConfig rectify;
  LossConfig loss;

  Json snapshot() const {
    return Json{{"scene", json::to_json(scene)},
                {"postproc", json::to_json(postproc)},
                {"rectify", json::to_json(rectify)},
                {"loss", json::to_json(loss)}};
  }
};

template <class F>
auto with_file(const fs::path& path, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const DataError&) {
    throw;
  } catch (const std::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

Json read_json(const fs::path& path) {
  return with_file(path, [&] { return json::parse_text(read_file(path), path.string()); });
}

DetectorMaps read_detector_maps(const fs::path& path) {
  return with_file(path, [&] { return DetectorMaps::from_channels(read_map(path)); });
}

void write_output(const fs::path& path, std::string_view bytes) {
  with_file(path, [&] {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    write_file_atomic(path, bytes);
  });
}

void emit_json(const std::string& out, const Json& j) {
  if (out.empty() || out == "-") {
    std::cout << j.dump() << '\n';
  } else {
    write_output(out, j.dump());
  }
}

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Run record written next to the outputs. It is the only file that carries
// a timestamp.
void write_manifest(const fs::path& path, const std::vector<std::string>& argv, const Json& inputs,
                    const Json& outputs, const Json& config, double seconds) {
  Json m{{"command", argv},     {"inputs", inputs},      {"outputs", outputs},
         {"config", config},    {"wall_time_s", seconds}, {"finished_at", utc_timestamp()}};
  write_output(path, m.dump(2));
}

fs::path manifest_for(const fs::path& output) {
  fs::path p = output;
  p += ".manifest.json";
  return p;
}

std::size_t thread_cap(std::size_t jobs) {
  std::size_t n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("CRAFT_KERNELS_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) n = std::min(n, static_cast<std::size_t>(v));
  }
  return std::max<std::size_t>(1, std::min(n, jobs));
}

template <class F>
void parallel_for(std::size_t jobs, F&& f) {
  std::atomic<std::size_t> next{0};
  std::exception_ptr first;
  std::mutex mu;
  const auto worker = [&] {
    for (std::size_t i; (i = next++) < jobs;) {
      try {
        f(i);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!first) first = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  const std::size_t n = thread_cap(jobs);
  for (std::size_t t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (first) std::rethrow_exception(first);
}

// Control points for every instance in a boxes or annotation document.
std::vector<ControlPointSet> initial_control_points(const Json& doc) {
  std::vector<ControlPointSet> out;
  if (doc.is_object() && doc.contains("boxes")) {
    const auto polys = json::parse_polygons(doc);
    if (!polys.empty()) {
      for (const TextPolygon& p : polys) out.push_back(init_control_points(p));
    } else {
      for (const OrientedBox& b : json::parse_boxes(doc)) out.push_back(init_control_points(b));
    }
    return out;
  }
  for (const WordAnnotation& w : json::parse_annotation(doc).words) {
    if (w.polygon) {
      out.push_back(init_control_points(*w.polygon));
    } else {
      out.push_back(init_control_points(min_area_rect(word_region(w))));
    }
  }
  return out;
}

int channel_index(const std::string& name) {
  static const std::vector<std::string> names{"region", "link", "sin", "cos"};
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (name == names[i]) return static_cast<int>(i);
  }
  try {
    std::size_t used = 0;
    const int i = std::stoi(name, &used);
    if (used == name.size() && i >= 0) return i;
  } catch (const std::exception&) {
  }
  throw CLI::ValidationError("--channel", "expected region, link, sin, cos or a channel index");
}

}  // namespace

int main(int argc, char** argv) {
  const auto started = std::chrono::steady_clock::now();
  const std::vector<std::string> args(argv, argv + argc);

  CLI::App app{"Character-region text detection toolkit"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "JSON config file; sections scene, postproc, rectify, loss")
      ->check(CLI::ExistingFile);

  // synth
  auto* synth = app.add_subcommand("synth", "Generate synthetic scenes (annotation JSON + CRMAP1 maps)");
  std::uint64_t seed = 0;
  int count = 1;
  std::string out;
  int width = 0, height = 0, n_words = 0;
  double noise = 0.0;
  synth->add_option("--seed", seed, "First seed");
  synth->add_option("--count", count, "Number of consecutive seeds")->check(CLI::PositiveNumber);
  synth->add_option("--out", out, "Output directory")->required();
  auto* width_opt = synth->add_option("--width", width)->check(CLI::PositiveNumber);
  auto* height_opt = synth->add_option("--height", height)->check(CLI::PositiveNumber);
  auto* words_opt = synth->add_option("--n-words", n_words)->check(CLI::NonNegativeNumber);
  auto* noise_opt = synth->add_option("--noise", noise, "Gaussian noise sigma")->check(CLI::NonNegativeNumber);

  // gtgen
  auto* gtgen = app.add_subcommand("gtgen", "Render detector maps from an annotation");
  std::string input;
  gtgen->add_option("annotation", input)->required()->check(CLI::ExistingFile);
  gtgen->add_option("--out", out, "Output CRMAP1 file")->required();

  // infer
  auto* infer = app.add_subcommand("infer", "Extract word boxes from detector maps");
  bool polygons = false;
  int stations = 10;
  double region_thr = 0.0, link_thr = 0.0;
  infer->add_option("maps", input)->required()->check(CLI::ExistingFile);
  infer->add_option("--out", out, "Output boxes JSON (default stdout)");
  infer->add_flag("--polygons", polygons, "Also extract curved polygons");
  infer->add_option("--stations", stations, "Boundary point pairs per polygon")->check(CLI::Range(2, 1000));
  auto* region_opt = infer->add_option("--region-threshold", region_thr)->check(CLI::Range(0.0, 1.0));
  auto* link_opt = infer->add_option("--link-threshold", link_thr)->check(CLI::Range(0.0, 1.0));

  // rectify
  auto* rectify = app.add_subcommand("rectify", "Iterative TPS rectification of text instances");
  std::string boxes_path, maps_dir;
  int iterations = 0;
  rectify->add_option("maps", input)->required()->check(CLI::ExistingFile);
  rectify->add_option("--boxes", boxes_path, "Boxes or annotation JSON")->required()->check(CLI::ExistingFile);
  rectify->add_option("--out", out, "Output JSON (default stdout)");
  rectify->add_option("--maps-dir", maps_dir, "Write rectified maps per instance here");
  auto* iter_opt = rectify->add_option("--iterations", iterations)->check(CLI::PositiveNumber);

  // eval
  auto* eval = app.add_subcommand("eval", "Score detections against ground truth");
  std::string pred_path, gt_path;
  double iou = 0.5;
  eval->add_option("--pred", pred_path)->required()->check(CLI::ExistingFile);
  eval->add_option("--gt", gt_path)->required()->check(CLI::ExistingFile);
  eval->add_option("--iou", iou, "IoU threshold")->check(CLI::Range(0.0, 1.0));
  eval->add_option("--out", out, "Output report JSON (default stdout)");

  // gradcheck
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of the loss gradients");
  int instances = 20, size = 32;
  double step = 1e-4, tolerance = 1e-4;
  gradcheck->add_option("--seed", seed);
  gradcheck->add_option("--instances", instances)->check(CLI::PositiveNumber);
  gradcheck->add_option("--size", size)->check(CLI::Range(2, 1024));
  gradcheck->add_option("--step", step)->check(CLI::PositiveNumber);
  gradcheck->add_option("--tolerance", tolerance)->check(CLI::PositiveNumber);
  gradcheck->add_option("--out", out, "Output JSON (default stdout)");

  // render
  auto* render = app.add_subcommand("render", "Render one map channel as a PNG heatmap");
  std::string channel = "region";
  render->add_option("maps", input)->required()->check(CLI::ExistingFile);
  render->add_option("--out", out, "Output PNG")->required();
  render->add_option("--channel", channel, "region, link, sin, cos or an index");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  const std::string sub = app.get_subcommands().front()->get_name();
  const auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  };
  try {
    Configs cfg;
    if (!config_path.empty()) {
      const Json doc = read_json(config_path);
      with_file(config_path, [&] {
        if (!doc.is_object()) throw FormatError("config must be a JSON object");
        if (doc.contains("scene")) json::apply(doc["scene"], cfg.scene);
        if (doc.contains("gt")) json::apply(doc["gt"], cfg.scene.gt);
        if (doc.contains("postproc")) json::apply(doc["postproc"], cfg.postproc);
        if (doc.contains("rectify")) json::apply(doc["rectify"], cfg.rectify);
        if (doc.contains("loss")) json::apply(doc["loss"], cfg.loss);
      });
    }
    if (*width_opt) cfg.scene.width = width;
    if (*height_opt) cfg.scene.height = height;
    if (*words_opt) cfg.scene.n_words = n_words;
    if (*noise_opt) cfg.scene.noise_sigma = noise;
    if (*region_opt) cfg.postproc.region_threshold = region_thr;
    if (*link_opt) cfg.postproc.link_threshold = link_thr;
    if (*iter_opt) cfg.rectify.iterations = iterations;
    try {
      cfg.scene.validate();
      cfg.postproc.validate();
      cfg.rectify.validate();
      cfg.loss.validate();
    } catch (const InvalidArgument& e) {
      std::cerr << "craft " << sub << ": " << e.what() << '\n';
      return 1;
    }

    if (sub == "synth") {
      const fs::path dir = out;
      with_file(dir, [&] { fs::create_directories(dir); });
      Json outputs = Json::array();
      for (int k = 0; k < count; ++k) {
        const std::string stem = "scene_" + std::to_string(seed + static_cast<std::uint64_t>(k));
        outputs.push_back((dir / (stem + ".json")).string());
        outputs.push_back((dir / (stem + ".crmap")).string());
      }
      parallel_for(static_cast<std::size_t>(count), [&](std::size_t k) {
        SceneConfig sc = cfg.scene;
        sc.seed = seed + k;
        const Scene scene = generate_scene(sc);
        const std::string stem = "scene_" + std::to_string(sc.seed);
        write_output(dir / (stem + ".json"), json::annotation(scene_annotation(scene)).dump());
        write_output(dir / (stem + ".crmap"), encode_maps(scene.maps.channels()));
      });
      Json config = cfg.snapshot()["scene"];
      config["seed"] = seed;
      write_manifest(dir / "manifest.json", args, Json::array(), outputs, config, elapsed());
    } else if (sub == "gtgen") {
      const Json doc = read_json(input);
      const Annotation a = with_file(input, [&] { return json::parse_annotation(doc); });
      const DetectorMaps maps = render_detector_maps(a.words, a.shape, cfg.scene.gt);
      write_output(out, encode_maps(maps.channels()));
      write_manifest(manifest_for(out), args, Json::array({input}), Json::array({out}),
                     json::to_json(cfg.scene.gt), elapsed());
    } else if (sub == "infer") {
      const DetectorMaps maps = read_detector_maps(input);
      const auto boxes = extract_boxes(maps, cfg.postproc);
      Json result;
      if (polygons) {
        const auto polys = with_file(input, [&] {
          return extract_polygons(maps.region, maps.link, cfg.postproc, stations);
        });
        result = json::boxes(boxes, &polys);
      } else {
        result = json::boxes(boxes);
      }
      emit_json(out, result);
      if (!out.empty() && out != "-") {
        write_manifest(manifest_for(out), args, Json::array({input}), Json::array({out}),
                       json::to_json(cfg.postproc), elapsed());
      }
    } else if (sub == "rectify") {
      const DetectorMaps maps = read_detector_maps(input);
      const Json doc = read_json(boxes_path);
      const auto initial = with_file(boxes_path, [&] { return initial_control_points(doc); });
      std::vector<RectifyResult> results(initial.size());
      parallel_for(initial.size(), [&](std::size_t i) {
        results[i] = with_file(input, [&] { return iterative_rectify(maps, initial[i], cfg.rectify); });
      });
      Json items = Json::array();
      Json outputs = Json::array();
      if (!out.empty() && out != "-") outputs.push_back(out);
      for (std::size_t i = 0; i < results.size(); ++i) {
        const RectifyResult& r = results[i];
        Json item{{"control_points", json::polygon(r.control_points.polygon())},
                  {"grid",
                   {{"width", r.grid.width},
                    {"height", r.grid.height},
                    {"band_top", r.grid.band_top},
                    {"band_bottom", r.grid.band_bottom}}},
                  {"centerline_deviation", centerline_deviation(r.rectified.region, r.grid)}};
        if (!maps_dir.empty()) {
          const std::string name = "instance_" + std::to_string(i) + ".crmap";
          const fs::path p = fs::path(maps_dir) / name;
          write_output(p, encode_maps(r.rectified.channels()));
          item["maps"] = name;
          outputs.push_back(p.string());
        }
        items.push_back(std::move(item));
      }
      emit_json(out, Json{{"instances", std::move(items)}});
      if (!out.empty() && out != "-") {
        write_manifest(manifest_for(out), args, Json::array({input, boxes_path}), outputs,
                       json::to_json(cfg.rectify), elapsed());
      }
    } else if (sub == "eval") {
      const Json pred = read_json(pred_path), gt = read_json(gt_path);
      const auto preds = with_file(pred_path, [&] { return json::parse_detections(pred); });
      const auto gts = with_file(gt_path, [&] { return json::parse_detections(gt); });
      emit_json(out, json::report(match_detections(preds, gts, iou)));
    } else if (sub == "gradcheck") {
      std::mt19937_64 rng(seed);
      std::uniform_real_distribution<double> u(0.0, 1.0);
      const auto random_map = [&] {
        Map<double> m(size, size);
        for (double& v : m.values()) v = u(rng);
        return m;
      };
      double worst_rl = 0.0, worst_sin = 0.0, worst_cos = 0.0, worst_rec = 0.0;
      for (int t = 0; t < instances; ++t) {
        const Map<double> gt = random_map(), pred = random_map();
        const BinaryMap mask = ohem_selection(pred, gt, cfg.loss);
        worst_rl = std::max(worst_rl, grad_check([&](const Map<double>& p) { return masked_mse(p, gt, mask); },
                                                 pred, step));
        const Map<double> gs = random_map(), gc = random_map(), w = random_map(), ps = random_map(),
                          pc = random_map();
        worst_sin = std::max(worst_sin, grad_check(
                                            [&](const Map<double>& p) {
                                              const auto r = orientation_loss(p, pc, gs, gc, w);
                                              return LossResult<double>{r.value, r.grad_sin};
                                            },
                                            ps, step));
        worst_cos = std::max(worst_cos, grad_check(
                                            [&](const Map<double>& p) {
                                              const auto r = orientation_loss(ps, p, gs, gc, w);
                                              return LossResult<double>{r.value, r.grad_cos};
                                            },
                                            pc, step));
        Map<double> logp = random_map();
        for (double& v : logp.values()) v = std::log(0.001 + 0.989 * v);
        worst_rec = std::max(worst_rec, grad_check(recognition_loss_log<double>, logp, step));
      }
      const bool pass = std::max({worst_rl, worst_sin, worst_cos, worst_rec}) < tolerance;
      emit_json(out, Json{{"region_link", worst_rl},
                          {"orientation_sin", worst_sin},
                          {"orientation_cos", worst_cos},
                          {"recognition", worst_rec},
                          {"tolerance", tolerance},
                          {"pass", pass}});
      if (!pass) {
        std::cerr << "craft gradcheck: relative error above tolerance\n";
        return 2;
      }
    } else if (sub == "render") {
      const auto channels = with_file(input, [&] { return read_map(input); });
      const int c = channel_index(channel);
      if (static_cast<std::size_t>(c) >= channels.size()) {
        throw DataError(input + ": channel " + std::to_string(c) + " not present (" +
                        std::to_string(channels.size()) + " channels)");
      }
      write_output(out, png::encode_heatmap(channels[static_cast<std::size_t>(c)]));
    }
  } catch (const CLI::ValidationError& e) {
    std::cerr << "craft " << sub << ": " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "craft " << sub << ": " << e.what() << '\n';
    return 2;
  }
  return 0;
}
