#include "phmadv/serialize.hpp"

#include <bit>
#include <cstdint>
#include <cstring>

#include "phmadv/error.hpp"
#include "phmadv/report.hpp"

namespace phmadv {
namespace {

constexpr char kAlphabet[] =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

int decode_char(char c) {
  if (c >= 'A' && c <= 'Z') return c - 'A';
  if (c >= 'a' && c <= 'z') return c - 'a' + 26;
  if (c >= '0' && c <= '9') return c - '0' + 52;
  if (c == '+') return 62;
  if (c == '/') return 63;
  return -1;
}

static_assert(std::endian::native == std::endian::little,
              "parameter encoding assumes a little-endian host");

nlohmann::json architecture(const NormalityModel& m) {
  const auto& c = m.config();
  return {{"kind", "stacked_lstm"},
          {"input_width", c.input_width},
          {"window", c.window},
          {"hidden", c.hidden},
          {"layers", c.layers},
          {"gate_order", "input,forget,cell,output"},
          {"readout", "last_step"}};
}

nlohmann::json architecture(const RulModel&) {
  return {{"kind", "cnn_rul"},
          {"window", RulModel::kWindow},
          {"channels", RulModel::kChannels},
          {"conv1", {RulModel::kConv1Filters, RulModel::kConv1Height, RulModel::kConv1Width}},
          {"conv2", {RulModel::kConv2Filters, RulModel::kConv2Height, RulModel::kConv2Width}},
          {"activation", "relu"},
          {"pooling", "global_average"}};
}

void check_format(const nlohmann::json& j, const std::string& expected) {
  if (!j.is_object() || j.value("format", "") != expected) {
    throw SchemaError("expected a " + expected + " container");
  }
  if (j.value("format_version", 0) != kFormatVersion) {
    throw SchemaError("unsupported " + expected + " format version");
  }
}

}  // namespace

std::string encode_base64(std::span<const double> values) {
  const std::size_t n = values.size() * sizeof(double);
  std::vector<unsigned char> bytes(n);
  if (n) std::memcpy(bytes.data(), values.data(), n);
  std::string out;
  out.reserve((n + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < n; i += 3) {
    const std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += kAlphabet[(v >> 6) & 63];
    out += kAlphabet[v & 63];
  }
  if (i < n) {
    std::uint32_t v = bytes[i] << 16;
    if (i + 1 < n) v |= bytes[i + 1] << 8;
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += i + 1 < n ? kAlphabet[(v >> 6) & 63] : '=';
    out += '=';
  }
  return out;
}

std::vector<double> decode_base64(const std::string& text) {
  if (text.size() % 4 != 0) throw SchemaError("base64 length is not a multiple of 4");
  std::vector<unsigned char> bytes;
  bytes.reserve(text.size() / 4 * 3);
  for (std::size_t i = 0; i < text.size(); i += 4) {
    int q[4];
    int pad = 0;
    for (int k = 0; k < 4; ++k) {
      const char c = text[i + k];
      if (c == '=' && i + 4 == text.size() && k >= 2) {
        q[k] = 0;
        ++pad;
      } else {
        q[k] = decode_char(c);
        if (q[k] < 0 || pad) throw SchemaError("invalid base64 character");
      }
    }
    const std::uint32_t v = (q[0] << 18) | (q[1] << 12) | (q[2] << 6) | q[3];
    bytes.push_back(static_cast<unsigned char>(v >> 16));
    if (pad < 2) bytes.push_back(static_cast<unsigned char>(v >> 8));
    if (pad < 1) bytes.push_back(static_cast<unsigned char>(v));
  }
  if (bytes.size() % sizeof(double) != 0) throw SchemaError("base64 payload is not float64 data");
  std::vector<double> values(bytes.size() / sizeof(double));
  if (!bytes.empty()) std::memcpy(values.data(), bytes.data(), bytes.size());
  return values;
}

nlohmann::json tensor_to_json(const std::string& name, const Tensor& t) {
  return {{"name", name}, {"shape", t.shape()}, {"data", encode_base64(t.data())}};
}

Parameter tensor_from_json(const nlohmann::json& j) {
  try {
    Parameter p;
    p.name = j.at("name").get<std::string>();
    p.value = Tensor(j.at("shape").get<Shape>(), decode_base64(j.at("data").get<std::string>()));
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("malformed tensor entry: ") + e.what());
  } catch (const ShapeError& e) {
    throw SchemaError(std::string("tensor entry: ") + e.what());
  }
}

nlohmann::json model_to_json(const ModelFile& file) {
  nlohmann::json j;
  j["format"] = "phmadv.model";
  j["format_version"] = kFormatVersion;
  const ParameterList* params = nullptr;
  std::visit(
      [&](const auto& m) {
        j["architecture"] = architecture(m);
        params = &m.parameters();
      },
      file.model);
  nlohmann::json list = nlohmann::json::array();
  for (const Parameter& p : *params) list.push_back(tensor_to_json(p.name, p.value));
  j["parameters"] = std::move(list);
  j["parameter_hash"] = hash_hex(parameter_hash(*params));
  if (file.standardizer) {
    j["standardizer"] = {{"mean", tensor_to_json("mean", file.standardizer->mean())},
                         {"stddev", tensor_to_json("stddev", file.standardizer->stddev())}};
  }
  j["metadata"] = file.metadata;
  return j;
}

ModelFile model_from_json(const nlohmann::json& j) {
  check_format(j, "phmadv.model");
  try {
    ParameterList params;
    for (const auto& p : j.at("parameters")) params.push_back(tensor_from_json(p));
    const auto& arch = j.at("architecture");
    const std::string kind = arch.at("kind").get<std::string>();
    ModelFile file{RulModel::zeros(), std::nullopt, j.value("metadata", nlohmann::json::object())};
    if (kind == "stacked_lstm") {
      NormalityModel::Config c;
      c.input_width = arch.at("input_width").get<std::size_t>();
      c.window = arch.at("window").get<std::size_t>();
      c.hidden = arch.at("hidden").get<std::size_t>();
      c.layers = arch.at("layers").get<std::size_t>();
      file.model = NormalityModel::from_parameters(c, std::move(params));
    } else if (kind == "cnn_rul") {
      file.model = RulModel::from_parameters(std::move(params));
    } else {
      throw SchemaError("unknown model architecture '" + kind + "'");
    }
    if (j.contains("standardizer")) {
      const auto& s = j.at("standardizer");
      file.standardizer = Standardizer(tensor_from_json(s.at("mean")).value,
                                       tensor_from_json(s.at("stddev")).value);
    }
    return file;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("malformed model file: ") + e.what());
  } catch (const ShapeError& e) {
    throw SchemaError(std::string("model file: ") + e.what());
  }
}

nlohmann::json stats_to_json(const StatsFile& file) {
  nlohmann::json j;
  j["format"] = "phmadv.residual_stats";
  j["format_version"] = kFormatVersion;
  const ResidualStats& s = file.stats;
  j["parameters"] = {tensor_to_json("mean", s.mean), tensor_to_json("covariance", s.covariance),
                     tensor_to_json("precision", s.precision),
                     tensor_to_json("lambda", Tensor::vector({s.lambda})),
                     tensor_to_json("threshold", Tensor::vector({file.threshold}))};
  j["lambda"] = s.lambda;
  j["threshold"] = file.threshold;
  j["metadata"] = file.metadata;
  return j;
}

StatsFile stats_from_json(const nlohmann::json& j) {
  check_format(j, "phmadv.residual_stats");
  try {
    StatsFile file;
    for (const auto& entry : j.at("parameters")) {
      Parameter p = tensor_from_json(entry);
      if (p.name == "mean") file.stats.mean = std::move(p.value);
      else if (p.name == "covariance") file.stats.covariance = std::move(p.value);
      else if (p.name == "precision") file.stats.precision = std::move(p.value);
      else if (p.name == "lambda") file.stats.lambda = p.value.item();
      else if (p.name == "threshold") file.threshold = p.value.item();
      else throw SchemaError("unknown residual stats entry '" + p.name + "'");
    }
    const std::size_t n = file.stats.mean.size();
    if (file.stats.mean.rank() != 1 || file.stats.covariance.shape() != Shape{n, n} ||
        file.stats.precision.shape() != Shape{n, n}) {
      throw SchemaError("residual stats tensors have inconsistent shapes");
    }
    file.metadata = j.value("metadata", nlohmann::json::object());
    return file;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("malformed residual stats file: ") + e.what());
  }
}

void save_json(const std::filesystem::path& path, const nlohmann::json& j) {
  write_text(path, j.dump(2) + "\n");
}

nlohmann::json load_json(const std::filesystem::path& path) {
  const std::string text = read_text(path);
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(path.string() + ": invalid JSON: " + e.what());
  }
}

}  // namespace phmadv
