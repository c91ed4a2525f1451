#include "lpattack/io.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

namespace lpattack {

using nlohmann::json;

void atomic_write_text(const std::filesystem::path& path,
                       const std::string& content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    }
    out << content;
    if (!out.good()) {
      throw std::runtime_error("write failed for " + tmp.string());
    }
  }
  std::filesystem::rename(tmp, path);
}

void save_model(const Classifier& model, const std::filesystem::path& path) {
  validate_classifier(model);
  json doc;
  doc["classes"] = model.classes;
  doc["input_shape"] = {model.input_shape.channels, model.input_shape.height,
                        model.input_shape.width};
  json layers = json::array();
  for (const Layer& layer : model.layers) {
    json jl;
    jl["activation"] = activation_name(layer.activation);
    jl["rows"] = layer.weight.rows();
    jl["cols"] = layer.weight.cols();
    std::vector<double> w;
    w.reserve(static_cast<std::size_t>(layer.weight.size()));
    for (Index r = 0; r < layer.weight.rows(); ++r) {
      for (Index c = 0; c < layer.weight.cols(); ++c) {
        w.push_back(layer.weight(r, c));
      }
    }
    jl["weight"] = w;
    jl["bias"] = std::vector<double>(layer.bias.data(),
                                     layer.bias.data() + layer.bias.size());
    layers.push_back(std::move(jl));
  }
  doc["layers"] = std::move(layers);
  atomic_write_text(path, doc.dump(2) + "\n");
}

namespace {

// json::at with the field name attached to any failure.
template <typename T>
T get_field(const json& obj, const char* field, const std::string& where) {
  if (!obj.contains(field)) {
    throw ParseError(where + ": missing field '" + field + "'");
  }
  try {
    return obj.at(field).get<T>();
  } catch (const json::exception& e) {
    throw ParseError(where + ": field '" + field + "': " + e.what());
  }
}

}  // namespace

Classifier load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ParseError("cannot open model file " + path.string());
  }
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ParseError("model file " + path.string() + ": " + e.what());
  }
  const std::string where = "model file " + path.string();

  Classifier model;
  model.classes = get_field<int>(doc, "classes", where);
  auto shape = get_field<std::vector<int>>(doc, "input_shape", where);
  if (shape.size() != 3) {
    throw ParseError(where + ": field 'input_shape' must have 3 entries");
  }
  model.input_shape = ImageShape{shape[0], shape[1], shape[2]};

  if (!doc.contains("layers") || !doc["layers"].is_array()) {
    throw ParseError(where + ": missing field 'layers'");
  }
  for (std::size_t l = 0; l < doc["layers"].size(); ++l) {
    const json& jl = doc["layers"][l];
    const std::string lwhere = where + ", layer " + std::to_string(l);
    Layer layer;
    layer.activation =
        activation_from_name(get_field<std::string>(jl, "activation", lwhere));
    const auto rows = get_field<Index>(jl, "rows", lwhere);
    const auto cols = get_field<Index>(jl, "cols", lwhere);
    auto w = get_field<std::vector<double>>(jl, "weight", lwhere);
    auto b = get_field<std::vector<double>>(jl, "bias", lwhere);
    if (rows <= 0 || cols <= 0) {
      throw ParseError(lwhere + ": field 'rows'/'cols' must be positive");
    }
    if (static_cast<Index>(w.size()) != rows * cols) {
      throw ParseError(lwhere + ": field 'weight' has " +
                       std::to_string(w.size()) + " entries, expected " +
                       std::to_string(rows * cols));
    }
    if (static_cast<Index>(b.size()) != rows) {
      throw ParseError(lwhere + ": field 'bias' has " +
                       std::to_string(b.size()) + " entries, expected " +
                       std::to_string(rows));
    }
    layer.weight = Mat(rows, cols);
    for (Index r = 0; r < rows; ++r) {
      for (Index c = 0; c < cols; ++c) {
        layer.weight(r, c) = w[static_cast<std::size_t>(r * cols + c)];
      }
    }
    layer.bias = Eigen::Map<Vec>(b.data(), rows);
    model.layers.push_back(std::move(layer));
  }
  validate_classifier(model);
  return model;
}

void save_image(const Image& img, const std::filesystem::path& path) {
  validate_image(img);
  std::ostringstream out;
  out << "IMGF " << img.shape.channels << ' ' << img.shape.height << ' '
      << img.shape.width << '\n';
  out << std::setprecision(17);
  for (Index i = 0; i < img.data.size(); ++i) {
    out << img.data[i] << (((i + 1) % img.shape.width == 0) ? '\n' : ' ');
  }
  atomic_write_text(path, out.str());
}

Image load_image(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw ParseError("cannot open image file " + path.string());
  }
  const std::string where = "image file " + path.string();
  std::string magic;
  in >> magic;
  if (magic != "IMGF") {
    throw ParseError(where + ": expected IMGF header");
  }
  Image img;
  if (!(in >> img.shape.channels >> img.shape.height >> img.shape.width) ||
      img.shape.size() <= 0) {
    throw ParseError(where + ": malformed C H W header");
  }
  img.data = Vec(img.shape.size());
  for (Index i = 0; i < img.data.size(); ++i) {
    if (!(in >> img.data[i])) {
      throw ParseError(where + ": truncated at component " +
                       std::to_string(i) + " of " +
                       std::to_string(img.data.size()));
    }
    if (!(img.data[i] >= 0.0 && img.data[i] <= 1.0)) {
      throw ParseError(where + ": component " + std::to_string(i) +
                       " outside [0,1]");
    }
  }
  return img;
}

}  // namespace lpattack
