#include "geoicl/embed.hpp"

#include <cmath>
#include <fstream>
#include <random>

#include <nlohmann/json.hpp>

#include "geoicl/util.hpp"

namespace geoicl {

using nlohmann::json;
using nlohmann::ordered_json;

Vector text_base_embed(std::string_view question_norm,
                       const TextFeaturizerConfig& cfg) {
  if (cfg.buckets < 256)
    throw Error("InvalidArgument", "text featurizer needs >= 256 buckets");
  if (cfg.ngram_min < 1 || cfg.ngram_max < cfg.ngram_min)
    throw Error("InvalidArgument", "bad n-gram range");
  if (question_norm.empty()) throw Error("EmptyText", "cannot embed empty text");

  Vector v = Vector::Zero(cfg.buckets);
  bool any = false;
  for (int n = cfg.ngram_min; n <= cfg.ngram_max; ++n) {
    if (static_cast<std::size_t>(n) > question_norm.size()) continue;
    for (std::size_t i = 0; i + n <= question_norm.size(); ++i) {
      auto h = fnv1a64(question_norm.substr(i, n));
      v[static_cast<Eigen::Index>(h % cfg.buckets)] += 1.0;
      any = true;
    }
  }
  // Shorter than the smallest n-gram: hash the whole string once.
  if (!any) v[static_cast<Eigen::Index>(fnv1a64(question_norm) % cfg.buckets)] = 1.0;
  return v / v.norm();
}

Vector image_base_embed(const ImageRaster& raster,
                        const ImageFeaturizerConfig& cfg) {
  if (cfg.grid < 4)
    throw Error("InvalidArgument", "image featurizer needs grid >= 4");
  if (cfg.channels != 1 && cfg.channels != 3)
    throw Error("InvalidArgument", "image featurizer channels must be 1 or 3");
  if (!raster.valid()) throw Error("InvalidArgument", "invalid raster");

  const ImageRaster img = convert_channels(raster, cfg.channels);
  const int g = cfg.grid;
  const int c = cfg.channels;
  Vector v = Vector::Zero(static_cast<Eigen::Index>(g) * g * c * 2);

  for (int gy = 0; gy < g; ++gy) {
    const int y0 = static_cast<int>(static_cast<std::int64_t>(gy) * img.height / g);
    const int y1 = static_cast<int>(static_cast<std::int64_t>(gy + 1) * img.height / g);
    for (int gx = 0; gx < g; ++gx) {
      const int x0 = static_cast<int>(static_cast<std::int64_t>(gx) * img.width / g);
      const int x1 = static_cast<int>(static_cast<std::int64_t>(gx + 1) * img.width / g);
      const Eigen::Index base = ((static_cast<Eigen::Index>(gy) * g + gx) * c) * 2;
      const std::int64_t count = static_cast<std::int64_t>(y1 - y0) * (x1 - x0);
      if (count <= 0) continue;  // image smaller than the grid
      for (int ch = 0; ch < c; ++ch) {
        double sum = 0.0, sum_sq = 0.0;
        for (int y = y0; y < y1; ++y)
          for (int x = x0; x < x1; ++x) {
            const double p = img.at(y, x, ch) / 255.0;
            sum += p;
            sum_sq += p * p;
          }
        const double mean = sum / static_cast<double>(count);
        const double var =
            std::max(0.0, sum_sq / static_cast<double>(count) - mean * mean);
        v[base + 2 * ch] = mean;
        v[base + 2 * ch + 1] = std::sqrt(var);
      }
    }
  }
  const double norm = v.norm();
  return norm > 0.0 ? Vector(v / norm) : v;
}

std::array<int, 4> AdapterParams::dims() const {
  return {static_cast<int>(layers[0].weights.rows()),
          static_cast<int>(layers[0].weights.cols()),
          static_cast<int>(layers[1].weights.cols()),
          static_cast<int>(layers[2].weights.cols())};
}

AdapterParams init_adapter(std::uint64_t seed, const std::array<int, 4>& dims) {
  for (int d : dims)
    if (d <= 0) throw Error("InvalidArgument", "adapter dims must be positive");
  std::mt19937_64 rng(seed);
  AdapterParams params;
  for (int l = 0; l < 3; ++l) {
    const int d_in = dims[l];
    const int d_out = dims[l + 1];
    const double limit = std::sqrt(6.0 / d_in);
    Matrix w(d_in, d_out);
    for (int i = 0; i < d_in; ++i)
      for (int j = 0; j < d_out; ++j)
        w(i, j) = (2.0 * uniform_unit(rng) - 1.0) * limit;
    params.layers[l].weights = std::move(w);
    params.layers[l].bias = Vector::Zero(d_out);
  }
  return params;
}

AdapterForwardCache adapter_forward_cached(const AdapterParams& params,
                                           const Eigen::Ref<const Vector>& x) {
  if (x.size() != params.input_dim())
    throw Error("DimMismatch",
                "adapter expects dim " + std::to_string(params.input_dim()) +
                    ", got " + std::to_string(x.size()));
  AdapterForwardCache c;
  c.input = x;
  c.pre1 = params.layers[0].weights.transpose() * x + params.layers[0].bias;
  c.hidden1 = c.pre1.cwiseMax(0.0);
  c.pre2 = params.layers[1].weights.transpose() * c.hidden1 + params.layers[1].bias;
  c.hidden2 = c.pre2.cwiseMax(0.0);
  c.pre_norm =
      params.layers[2].weights.transpose() * c.hidden2 + params.layers[2].bias;
  c.norm = c.pre_norm.norm();
  if (!std::isfinite(c.norm) || c.norm == 0.0)
    throw Error("NonFinite", "adapter output has zero or non-finite norm");
  c.output = c.pre_norm / c.norm;
  return c;
}

Vector adapter_forward(const AdapterParams& params,
                       const Eigen::Ref<const Vector>& x) {
  return adapter_forward_cached(params, x).output;
}

std::map<std::string, Vector> import_external_embeddings(
    const std::filesystem::path& path, const std::set<std::string>& known_ids) {
  std::ifstream in(path);
  if (!in) throw Error("Io", "cannot open " + path.string());
  std::map<std::string, Vector> out;
  Eigen::Index dim = -1;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw MalformedRecordError(line_no, e.what());
    }
    std::string id;
    std::vector<double> values;
    try {
      id = j.at("id").get<std::string>();
      values = j.at("vector").get<std::vector<double>>();
    } catch (const json::exception& e) {
      throw MalformedRecordError(line_no, e.what());
    }
    if (!known_ids.count(id))
      throw Error("UnknownId", "id \"" + id + "\" not in dataset");
    if (out.count(id)) throw Error("DuplicateId", "id \"" + id + "\"");
    if (dim < 0) dim = static_cast<Eigen::Index>(values.size());
    if (static_cast<Eigen::Index>(values.size()) != dim || dim == 0)
      throw Error("DimMismatch",
                  "line " + std::to_string(line_no) + ": expected dim " +
                      std::to_string(dim) + ", got " +
                      std::to_string(values.size()));
    Vector v = Eigen::Map<const Vector>(values.data(),
                                        static_cast<Eigen::Index>(values.size()));
    if (!v.allFinite())
      throw Error("NonFinite", "line " + std::to_string(line_no));
    out.emplace(std::move(id), std::move(v));
  }
  return out;
}

namespace {

ordered_json tower_to_json(const AdapterParams& p) {
  ordered_json layers = ordered_json::array();
  for (const auto& layer : p.layers) {
    std::vector<double> w(static_cast<std::size_t>(layer.weights.size()));
    // Row-major flatten of the d_in x d_out matrix.
    Eigen::Index k = 0;
    for (Eigen::Index i = 0; i < layer.weights.rows(); ++i)
      for (Eigen::Index j = 0; j < layer.weights.cols(); ++j)
        w[static_cast<std::size_t>(k++)] = layer.weights(i, j);
    std::vector<double> b(layer.bias.data(), layer.bias.data() + layer.bias.size());
    layers.push_back(ordered_json{{"w", w}, {"b", b}});
  }
  auto d = p.dims();
  return ordered_json{{"dims", std::vector<int>(d.begin(), d.end())},
                      {"layers", layers}};
}

AdapterParams tower_from_json(const json& j) {
  auto dims = j.at("dims").get<std::vector<int>>();
  if (dims.size() != 4) throw Error("Schema", "adapter dims must have 4 entries");
  AdapterParams p;
  const auto& layers = j.at("layers");
  if (layers.size() != 3) throw Error("Schema", "adapter must have 3 layers");
  for (int l = 0; l < 3; ++l) {
    const int d_in = dims[l], d_out = dims[l + 1];
    auto w = layers[l].at("w").get<std::vector<double>>();
    auto b = layers[l].at("b").get<std::vector<double>>();
    if (w.size() != static_cast<std::size_t>(d_in) * d_out ||
        b.size() != static_cast<std::size_t>(d_out))
      throw Error("Schema", "layer " + std::to_string(l) + " size mismatch");
    Matrix wm(d_in, d_out);
    std::size_t k = 0;
    for (int i = 0; i < d_in; ++i)
      for (int jj = 0; jj < d_out; ++jj) wm(i, jj) = w[k++];
    p.layers[l].weights = std::move(wm);
    p.layers[l].bias = Eigen::Map<const Vector>(b.data(), d_out);
    if (!p.layers[l].weights.allFinite() || !p.layers[l].bias.allFinite())
      throw Error("NonFinite", "non-finite checkpoint parameters");
  }
  return p;
}

}  // namespace

void save_checkpoint(const RetrieverCheckpoint& ckpt,
                     const std::filesystem::path& path) {
  ordered_json j;
  j["schema"] = "geoicl/ckpt/v1";
  j["seed"] = ckpt.seed;
  j["text"] = tower_to_json(ckpt.text);
  j["image"] = tower_to_json(ckpt.image);
  j["featurizer"] = ordered_json{
      {"text",
       {{"buckets", ckpt.featurizer.text.buckets},
        {"ngram_min", ckpt.featurizer.text.ngram_min},
        {"ngram_max", ckpt.featurizer.text.ngram_max}}},
      {"image",
       {{"grid", ckpt.featurizer.image.grid},
        {"channels", ckpt.featurizer.image.channels}}}};
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("Io", "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

RetrieverCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("Io", "cannot open " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error("Schema", std::string("bad checkpoint: ") + e.what());
  }
  if (j.value("schema", "") != "geoicl/ckpt/v1")
    throw Error("Schema", "unsupported checkpoint schema");
  RetrieverCheckpoint ckpt;
  ckpt.seed = j.value("seed", 0ull);
  ckpt.text = tower_from_json(j.at("text"));
  ckpt.image = tower_from_json(j.at("image"));
  const auto& f = j.at("featurizer");
  ckpt.featurizer.text.buckets = f.at("text").at("buckets").get<int>();
  ckpt.featurizer.text.ngram_min = f.at("text").at("ngram_min").get<int>();
  ckpt.featurizer.text.ngram_max = f.at("text").at("ngram_max").get<int>();
  ckpt.featurizer.image.grid = f.at("image").at("grid").get<int>();
  ckpt.featurizer.image.channels = f.at("image").at("channels").get<int>();
  return ckpt;
}

}  // namespace geoicl
