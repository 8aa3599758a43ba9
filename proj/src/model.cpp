#include "spacing/model.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include <json.hpp>

#include "spacing/error.hpp"
#include "spacing/random.hpp"

namespace spacing {

using json = nlohmann::json;

Eigen::MatrixXd AffineLayer::apply(const Eigen::MatrixXd& x) const {
  Eigen::MatrixXd y = x * weight;
  y.rowwise() += bias;
  return y;
}

AffineLayer AffineLayer::glorot(Eigen::Index in, Eigen::Index out, std::uint64_t seed) {
  const double a = std::sqrt(6.0 / static_cast<double>(in + out));
  Rng rng(seed);
  std::uniform_real_distribution<double> u(-a, a);
  AffineLayer layer{Eigen::MatrixXd(in, out), Eigen::RowVectorXd::Zero(out)};
  for (Eigen::Index r = 0; r < in; ++r) {
    for (Eigen::Index c = 0; c < out; ++c) layer.weight(r, c) = u(rng);
  }
  return layer;
}

bool GradientSet::all_finite() const {
  for (const auto& g : layers) {
    if (!g.weight.allFinite() || !g.bias.allFinite()) return false;
  }
  return true;
}

GradientSet& GradientSet::operator+=(const GradientSet& other) {
  if (layers.size() != other.layers.size()) {
    throw Error(ErrorCode::DimensionMismatch, "gradient sets have different layer counts");
  }
  for (std::size_t l = 0; l < layers.size(); ++l) {
    layers[l].weight += other.layers[l].weight;
    layers[l].bias += other.layers[l].bias;
  }
  return *this;
}

FeatureExtractor FeatureExtractor::create(const std::vector<Eigen::Index>& widths,
                                          std::uint64_t seed) {
  if (widths.size() < 2) throw Error(ErrorCode::InvalidArgument, "need input and output widths");
  std::vector<AffineLayer> layers;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    layers.push_back(AffineLayer::glorot(widths[l], widths[l + 1], derive_seed(seed, l)));
  }
  return FeatureExtractor(std::move(layers));
}

FeatureExtractor::FeatureExtractor(std::vector<AffineLayer> layers) : layers_(std::move(layers)) {
  if (layers_.empty()) throw Error(ErrorCode::InvalidArgument, "extractor needs a layer");
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& layer = layers_[l];
    if (layer.bias.size() != layer.out_dim() || layer.in_dim() < 1 || layer.out_dim() < 1) {
      throw Error(ErrorCode::InvalidArgument, "layer " + std::to_string(l) + " is malformed");
    }
    if (l > 0 && layers_[l - 1].out_dim() != layer.in_dim()) {
      throw Error(ErrorCode::InvalidArgument,
                  "layer " + std::to_string(l) + " input does not match previous output");
    }
  }
}

bool FeatureExtractor::all_finite() const {
  for (const auto& layer : layers_) {
    if (!layer.weight.allFinite() || !layer.bias.allFinite()) return false;
  }
  return true;
}

bool FeatureExtractor::operator==(const FeatureExtractor& other) const {
  if (layers_.size() != other.layers_.size()) return false;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& a = layers_[l];
    const auto& b = other.layers_[l];
    if (a.weight.rows() != b.weight.rows() || a.weight.cols() != b.weight.cols()) return false;
    if (a.weight != b.weight || a.bias != b.bias) return false;
  }
  return true;
}

ForwardResult forward(const FeatureExtractor& extractor, const Eigen::MatrixXd& inputs) {
  if (inputs.cols() != extractor.input_dim()) {
    throw Error(ErrorCode::DimensionMismatch, "input width " + std::to_string(inputs.cols()) +
                                                  ", extractor expects " +
                                                  std::to_string(extractor.input_dim()));
  }
  const auto& layers = extractor.layers();
  ForwardResult result;
  result.cache.inputs.reserve(layers.size());
  Eigen::MatrixXd x = inputs;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    Eigen::MatrixXd y = layers[l].apply(x);
    result.cache.inputs.push_back(std::move(x));
    if (l + 1 < layers.size()) y = y.array().tanh().matrix();
    x = std::move(y);
  }
  result.latents = std::move(x);
  return result;
}

Eigen::MatrixXd encode(const FeatureExtractor& extractor, const Eigen::MatrixXd& inputs) {
  return forward(extractor, inputs).latents;
}

GradientSet backward(const FeatureExtractor& extractor, const ForwardCache& cache,
                     const Eigen::MatrixXd& upstream) {
  const auto& layers = extractor.layers();
  if (cache.inputs.size() != layers.size()) {
    throw Error(ErrorCode::StaleCache, "cache has " + std::to_string(cache.inputs.size()) +
                                           " layers, extractor " +
                                           std::to_string(layers.size()));
  }
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (cache.inputs[l].cols() != layers[l].in_dim() ||
        cache.inputs[l].rows() != upstream.rows()) {
      throw Error(ErrorCode::StaleCache, "cached input of layer " + std::to_string(l) +
                                             " does not match the extractor or upstream");
    }
  }
  if (upstream.cols() != extractor.latent_dim()) {
    throw Error(ErrorCode::StaleCache, "upstream width does not match the latent dimension");
  }

  GradientSet grads;
  grads.layers.resize(layers.size());
  Eigen::MatrixXd g = upstream;
  for (std::size_t l = layers.size(); l-- > 0;) {
    const Eigen::MatrixXd& x = cache.inputs[l];
    grads.layers[l].weight = x.transpose() * g;
    grads.layers[l].bias = g.colwise().sum();
    if (l > 0) {
      // x = tanh(a) for every layer but the first, and tanh' = 1 - tanh^2.
      g = ((g * layers[l].weight.transpose()).array() * (1.0 - x.array().square())).matrix();
    }
  }
  return grads;
}

void sgd_step(FeatureExtractor& extractor, const GradientSet& grads, double learning_rate) {
  if (!(learning_rate > 0.0)) throw Error(ErrorCode::InvalidArgument, "learning rate must be > 0");
  auto& layers = extractor.layers();
  if (grads.layers.size() != layers.size()) {
    throw Error(ErrorCode::DimensionMismatch, "gradient layer count differs from extractor");
  }
  for (std::size_t l = 0; l < layers.size(); ++l) {
    layers[l].weight -= learning_rate * grads.layers[l].weight;
    layers[l].bias -= learning_rate * grads.layers[l].bias;
  }
}

ClassifierHead ClassifierHead::create(Eigen::Index latent_dim, Eigen::Index classes,
                                      std::uint64_t seed) {
  return ClassifierHead(AffineLayer::glorot(latent_dim, classes, seed));
}

ClassifierHead::ClassifierHead(AffineLayer layer) : layer_(std::move(layer)) {
  if (layer_.in_dim() < 1 || layer_.out_dim() < 1 || layer_.bias.size() != layer_.out_dim()) {
    throw Error(ErrorCode::InvalidArgument, "classifier head is malformed");
  }
}

bool ClassifierHead::operator==(const ClassifierHead& other) const {
  return layer_.weight.rows() == other.layer_.weight.rows() &&
         layer_.weight.cols() == other.layer_.weight.cols() &&
         layer_.weight == other.layer_.weight && layer_.bias == other.layer_.bias;
}

Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd shifted = logits.colwise() - logits.rowwise().maxCoeff();
  Eigen::MatrixXd e = shifted.array().exp().matrix();
  return e.array().colwise() / e.rowwise().sum().array();
}

Eigen::MatrixXd softmax_backward(const Eigen::MatrixXd& probabilities,
                                 const Eigen::MatrixXd& probability_gradient) {
  const Eigen::VectorXd inner = (probabilities.array() * probability_gradient.array()).rowwise().sum();
  return (probabilities.array() * (probability_gradient.colwise() - inner).array()).matrix();
}

HeadOutput head_forward(const ClassifierHead& head, const Eigen::MatrixXd& latents) {
  if (latents.cols() != head.latent_dim()) {
    throw Error(ErrorCode::DimensionMismatch, "latent width " + std::to_string(latents.cols()) +
                                                  ", head expects " +
                                                  std::to_string(head.latent_dim()));
  }
  HeadOutput out;
  out.logits = head.layer().apply(latents);
  out.probabilities = softmax_rows(out.logits);
  return out;
}

HeadGradient head_backward(const ClassifierHead& head, const Eigen::MatrixXd& latents,
                           const Eigen::MatrixXd& logit_gradient) {
  if (latents.cols() != head.latent_dim() || logit_gradient.cols() != head.classes() ||
      latents.rows() != logit_gradient.rows()) {
    throw Error(ErrorCode::DimensionMismatch, "head backward shapes disagree");
  }
  HeadGradient grad;
  grad.parameters.weight = latents.transpose() * logit_gradient;
  grad.parameters.bias = logit_gradient.colwise().sum();
  grad.latents = logit_gradient * head.layer().weight.transpose();
  return grad;
}

void sgd_step(ClassifierHead& head, const AffineGradient& grad, double learning_rate) {
  if (!(learning_rate > 0.0)) throw Error(ErrorCode::InvalidArgument, "learning rate must be > 0");
  head.layer().weight -= learning_rate * grad.weight;
  head.layer().bias -= learning_rate * grad.bias;
}

namespace {

constexpr const char* kCheckpointFormat = "spacing-ncd-checkpoint";

json tensor(const std::string& name, const Eigen::MatrixXd& m) {
  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  }
  return json{{"name", name}, {"shape", {m.rows(), m.cols()}}, {"data", std::move(data)}};
}

void append_layer(json& tensors, const std::string& prefix, const AffineLayer& layer) {
  tensors.push_back(tensor(prefix + ".weight", layer.weight));
  tensors.push_back(tensor(prefix + ".bias", Eigen::MatrixXd(layer.bias)));
}

Eigen::MatrixXd read_tensor(const json& t) {
  const auto shape = t.at("shape").get<std::vector<Eigen::Index>>();
  const auto data = t.at("data").get<std::vector<double>>();
  if (shape.size() != 2 || shape[0] < 0 || shape[1] < 0 ||
      static_cast<std::size_t>(shape[0] * shape[1]) != data.size()) {
    throw Error(ErrorCode::SchemaError,
                "tensor '" + t.at("name").get<std::string>() + "' has inconsistent shape");
  }
  Eigen::MatrixXd m(shape[0], shape[1]);
  std::size_t k = 0;
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = data[k++];
  }
  return m;
}

AffineLayer take_layer(const std::map<std::string, Eigen::MatrixXd>& named,
                       const std::string& prefix) {
  const auto w = named.find(prefix + ".weight");
  const auto b = named.find(prefix + ".bias");
  if (w == named.end() || b == named.end()) {
    throw Error(ErrorCode::SchemaError, "missing tensors for '" + prefix + "'");
  }
  if (b->second.rows() != 1 || b->second.cols() != w->second.cols()) {
    throw Error(ErrorCode::SchemaError, "bias shape of '" + prefix + "' does not match weight");
  }
  return AffineLayer{w->second, b->second.row(0)};
}

}  // namespace

std::string checkpoint_to_json(const ModelBundle& model) {
  json tensors = json::array();
  const auto& layers = model.backbone.layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    append_layer(tensors, "backbone." + std::to_string(l), layers[l]);
  }
  if (model.labeled_head) append_layer(tensors, "labeled_head", model.labeled_head->layer());
  if (model.unlabeled_head) append_layer(tensors, "unlabeled_head", model.unlabeled_head->layer());
  json doc{{"format", kCheckpointFormat},
           {"version", 1},
           {"backbone_layers", layers.size()},
           {"tensors", std::move(tensors)}};
  return doc.dump();
}

ModelBundle checkpoint_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("checkpoint is not valid JSON: ") + e.what());
  }
  try {
    if (doc.at("format").get<std::string>() != kCheckpointFormat) {
      throw Error(ErrorCode::SchemaError, "not a spacing-ncd checkpoint");
    }
    std::map<std::string, Eigen::MatrixXd> named;
    for (const auto& t : doc.at("tensors")) named[t.at("name").get<std::string>()] = read_tensor(t);

    const auto count = doc.at("backbone_layers").get<std::size_t>();
    std::vector<AffineLayer> layers;
    for (std::size_t l = 0; l < count; ++l) {
      layers.push_back(take_layer(named, "backbone." + std::to_string(l)));
    }
    ModelBundle model{FeatureExtractor(std::move(layers)), std::nullopt, std::nullopt};
    if (named.count("labeled_head.weight")) {
      model.labeled_head = ClassifierHead(take_layer(named, "labeled_head"));
    }
    if (named.count("unlabeled_head.weight")) {
      model.unlabeled_head = ClassifierHead(take_layer(named, "unlabeled_head"));
    }
    return model;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::SchemaError, std::string("malformed checkpoint: ") + e.what());
  }
}

void save_checkpoint(const ModelBundle& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << checkpoint_to_json(model) << '\n';
  if (!out) throw Error(ErrorCode::IoError, "failed writing " + path.string());
}

ModelBundle load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return checkpoint_from_json(buffer.str());
}

}  // namespace spacing
