#include "spacing/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "spacing/error.hpp"

namespace spacing {

namespace {

constexpr int kMeanAttempts = 1000;

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  return s;
}

template <typename T>
T parse_number(std::string_view field, std::size_t line_no, const std::string& path) {
  field = trim(field);
  if (!field.empty() && field.front() == '+') field.remove_prefix(1);
  T value{};
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size()) {
    throw Error(ErrorCode::ParseError, path + " line " + std::to_string(line_no) +
                                           ": cannot parse '" + std::string(field) + "'");
  }
  return value;
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::pair<std::size_t, std::vector<std::string>>> rows;  // (line, fields)
};

CsvTable read_table(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + path.string());
  CsvTable table;
  std::ostringstream buffer;
  buffer << in.rdbuf();
  const std::string storage = buffer.str();

  std::string_view text(storage);
  std::size_t line_no = 0;
  bool have_header = false;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = trim(text.substr(0, nl));
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split_fields(line);
    if (!have_header) {
      for (auto f : fields) table.header.emplace_back(trim(f));
      have_header = true;
    } else {
      table.rows.emplace_back(line_no, std::vector<std::string>(fields.begin(), fields.end()));
    }
  }
  if (!have_header) throw Error(ErrorCode::SchemaError, path.string() + " has no header");
  return table;
}

void check_feature_header(const std::vector<std::string>& header, std::size_t offset,
                          const std::string& path) {
  for (std::size_t k = offset; k < header.size(); ++k) {
    const std::string expected = "f" + std::to_string(k - offset);
    if (header[k] != expected) {
      throw Error(ErrorCode::SchemaError, path + ": column " + std::to_string(k) + " is '" +
                                              header[k] + "', expected '" + expected + "'");
    }
  }
}

std::ofstream open_for_write(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  return out;
}

void finish_write(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw Error(ErrorCode::IoError, "failed writing " + path.string());
}

}  // namespace

void Dataset::validate() const {
  if (static_cast<Eigen::Index>(labels.size()) != features.rows() ||
      static_cast<Eigen::Index>(ids.size()) != features.rows()) {
    throw Error(ErrorCode::SchemaError, "dataset columns have different lengths");
  }
  for (int label : labels) {
    if (label < kUnlabeled) {
      throw Error(ErrorCode::SchemaError, "label " + std::to_string(label) + " is invalid");
    }
  }
}

void SplitSpec::validate() const {
  if (total_classes < 1) throw Error(ErrorCode::InvalidArgument, "total_classes must be >= 1");
  if (labeled_classes < 0 || labeled_classes > total_classes) {
    throw Error(ErrorCode::InvalidArgument, "labeled_classes must lie in [0, total_classes]");
  }
  if (samples_per_class < 1) throw Error(ErrorCode::InvalidArgument, "samples_per_class must be >= 1");
  if (dim < 1) throw Error(ErrorCode::InvalidArgument, "dim must be >= 1");
  if (!(cluster_std >= 0.0) || !std::isfinite(cluster_std)) {
    throw Error(ErrorCode::InvalidArgument, "cluster_std must be finite and >= 0");
  }
  if (!(mean_separation > 0.0) || !std::isfinite(mean_separation)) {
    throw Error(ErrorCode::InvalidArgument, "mean_separation must be positive");
  }
}

std::map<std::int64_t, int> EvaluationSidecar::by_id() const {
  std::map<std::int64_t, int> m;
  for (const auto& [id, label] : rows) m[id] = label;
  return m;
}

std::size_t EvaluationSidecar::distinct_classes() const {
  std::set<int> classes;
  for (const auto& row : rows) classes.insert(row.second);
  return classes.size();
}

GeneratedData generate_mixture(const SplitSpec& spec) {
  spec.validate();
  const int k = spec.total_classes;
  const int d = spec.dim;

  // Spread chosen so typical pairwise mean distances sit near 1.5x the minimum.
  const double spread = 1.5 * spec.mean_separation / std::sqrt(2.0 * d);
  Rng mean_rng(derive_seed(spec.seed, 0));
  std::normal_distribution<double> mean_draw(0.0, spread);
  Eigen::MatrixXd means(k, d);
  for (int c = 0; c < k; ++c) {
    bool placed = false;
    for (int attempt = 0; attempt < kMeanAttempts && !placed; ++attempt) {
      for (int j = 0; j < d; ++j) means(c, j) = mean_draw(mean_rng);
      placed = true;
      for (int prev = 0; prev < c && placed; ++prev) {
        placed = (means.row(c) - means.row(prev)).norm() >= spec.mean_separation;
      }
    }
    if (!placed) {
      throw Error(ErrorCode::SeparationInfeasible,
                  "could not place class " + std::to_string(c) + " after " +
                      std::to_string(kMeanAttempts) + " attempts");
    }
  }

  GeneratedData out;
  out.class_means = means;
  const Eigen::Index n = static_cast<Eigen::Index>(k) * spec.samples_per_class;
  out.dataset.features.resize(n, d);
  out.dataset.labels.reserve(static_cast<std::size_t>(n));
  out.dataset.ids.reserve(static_cast<std::size_t>(n));

  Rng sample_rng(derive_seed(spec.seed, 1));
  std::normal_distribution<double> noise(0.0, 1.0);
  Eigen::Index row = 0;
  for (int c = 0; c < k; ++c) {
    for (int s = 0; s < spec.samples_per_class; ++s, ++row) {
      for (int j = 0; j < d; ++j) {
        out.dataset.features(row, j) = means(c, j) + spec.cluster_std * noise(sample_rng);
      }
      out.dataset.ids.push_back(row);
      if (c < spec.labeled_classes) {
        out.dataset.labels.push_back(c);
      } else {
        out.dataset.labels.push_back(kUnlabeled);
        out.truth.rows.emplace_back(row, c);
      }
    }
  }
  return out;
}

Dataset load_csv(const std::filesystem::path& path) {
  const std::string name = path.string();
  CsvTable table = read_table(path);
  if (table.header.size() < 2 || table.header[0] != "id" || table.header[1] != "label") {
    throw Error(ErrorCode::SchemaError, name + ": header must start with 'id,label'");
  }
  check_feature_header(table.header, 2, name);
  const std::size_t width = table.header.size();
  const auto d = static_cast<Eigen::Index>(width - 2);

  Dataset ds;
  ds.features.resize(static_cast<Eigen::Index>(table.rows.size()), d);
  Eigen::Index r = 0;
  for (const auto& [line_no, fields] : table.rows) {
    if (fields.size() != width) {
      throw Error(ErrorCode::ParseError, name + " line " + std::to_string(line_no) + ": expected " +
                                             std::to_string(width) + " columns, found " +
                                             std::to_string(fields.size()));
    }
    ds.ids.push_back(parse_number<std::int64_t>(fields[0], line_no, name));
    const int label = parse_number<int>(fields[1], line_no, name);
    if (label < kUnlabeled) {
      throw Error(ErrorCode::ParseError,
                  name + " line " + std::to_string(line_no) + ": label must be >= -1");
    }
    ds.labels.push_back(label);
    for (Eigen::Index j = 0; j < d; ++j) {
      ds.features(r, j) = parse_number<double>(fields[static_cast<std::size_t>(j) + 2], line_no, name);
    }
    ++r;
  }
  return ds;
}

void save_csv(const Dataset& dataset, const std::filesystem::path& path) {
  dataset.validate();
  auto out = open_for_write(path);
  out << "id,label";
  for (Eigen::Index j = 0; j < dataset.dim(); ++j) out << ",f" << j;
  out << '\n';
  for (Eigen::Index i = 0; i < dataset.size(); ++i) {
    out << dataset.ids[static_cast<std::size_t>(i)] << ','
        << dataset.labels[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < dataset.dim(); ++j) out << ',' << format_double(dataset.features(i, j));
    out << '\n';
  }
  finish_write(out, path);
}

EvaluationSidecar load_sidecar(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw Error(ErrorCode::MissingSidecar, "ground-truth sidecar " + path.string() + " not found");
  }
  const std::string name = path.string();
  CsvTable table = read_table(path);
  if (table.header != std::vector<std::string>{"id", "true_label"}) {
    throw Error(ErrorCode::SchemaError, name + ": header must be 'id,true_label'");
  }
  EvaluationSidecar sidecar;
  for (const auto& [line_no, fields] : table.rows) {
    if (fields.size() != 2) {
      throw Error(ErrorCode::ParseError,
                  name + " line " + std::to_string(line_no) + ": expected 2 columns");
    }
    sidecar.rows.emplace_back(parse_number<std::int64_t>(fields[0], line_no, name),
                              parse_number<int>(fields[1], line_no, name));
  }
  return sidecar;
}

void save_sidecar(const EvaluationSidecar& sidecar, const std::filesystem::path& path) {
  auto out = open_for_write(path);
  out << "id,true_label\n";
  for (const auto& [id, label] : sidecar.rows) out << id << ',' << label << '\n';
  finish_write(out, path);
}

Eigen::MatrixXd load_points_csv(const std::filesystem::path& path) {
  const std::string name = path.string();
  CsvTable table = read_table(path);
  if (table.header.size() < 2 || table.header[0] != "id") {
    throw Error(ErrorCode::SchemaError, name + ": header must be 'id,f0,...'");
  }
  check_feature_header(table.header, 1, name);
  const std::size_t width = table.header.size();
  Eigen::MatrixXd points(static_cast<Eigen::Index>(table.rows.size()),
                         static_cast<Eigen::Index>(width - 1));
  Eigen::Index r = 0;
  for (const auto& [line_no, fields] : table.rows) {
    if (fields.size() != width) {
      throw Error(ErrorCode::ParseError, name + " line " + std::to_string(line_no) + ": expected " +
                                             std::to_string(width) + " columns, found " +
                                             std::to_string(fields.size()));
    }
    parse_number<std::int64_t>(fields[0], line_no, name);
    for (std::size_t j = 1; j < width; ++j) {
      points(r, static_cast<Eigen::Index>(j - 1)) = parse_number<double>(fields[j], line_no, name);
    }
    ++r;
  }
  return points;
}

void save_points_csv(const Eigen::MatrixXd& points, const std::filesystem::path& path) {
  auto out = open_for_write(path);
  out << "id";
  for (Eigen::Index j = 0; j < points.cols(); ++j) out << ",f" << j;
  out << '\n';
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    out << i;
    for (Eigen::Index j = 0; j < points.cols(); ++j) out << ',' << format_double(points(i, j));
    out << '\n';
  }
  finish_write(out, path);
}

LabeledView::LabeledView(Eigen::MatrixXd features, std::vector<int> labels,
                         std::vector<std::int64_t> ids)
    : features_(std::move(features)), labels_(std::move(labels)), ids_(std::move(ids)) {}

std::vector<int> LabeledView::classes() const {
  std::set<int> distinct(labels_.begin(), labels_.end());
  return {distinct.begin(), distinct.end()};
}

Eigen::MatrixXd LabeledView::rows(std::span<const Eigen::Index> indices) const {
  if (observer_) observer_(indices.size());
  Eigen::MatrixXd out(static_cast<Eigen::Index>(indices.size()), features_.cols());
  for (std::size_t k = 0; k < indices.size(); ++k) {
    out.row(static_cast<Eigen::Index>(k)) = features_.row(indices[k]);
  }
  return out;
}

std::vector<int> LabeledView::labels(std::span<const Eigen::Index> indices) const {
  std::vector<int> out;
  out.reserve(indices.size());
  for (Eigen::Index i : indices) out.push_back(labels_[static_cast<std::size_t>(i)]);
  return out;
}

Eigen::MatrixXd LabeledView::all_features() const {
  if (observer_) observer_(static_cast<std::size_t>(features_.rows()));
  return features_;
}

UnlabeledView::UnlabeledView(Eigen::MatrixXd features, std::vector<std::int64_t> ids)
    : features_(std::move(features)), ids_(std::move(ids)) {}

Eigen::MatrixXd UnlabeledView::rows(std::span<const Eigen::Index> indices) const {
  if (observer_) observer_(indices.size());
  Eigen::MatrixXd out(static_cast<Eigen::Index>(indices.size()), features_.cols());
  for (std::size_t k = 0; k < indices.size(); ++k) {
    out.row(static_cast<Eigen::Index>(k)) = features_.row(indices[k]);
  }
  return out;
}

Eigen::MatrixXd UnlabeledView::all_features() const {
  if (observer_) observer_(static_cast<std::size_t>(features_.rows()));
  return features_;
}

std::pair<LabeledView, UnlabeledView> split(const Dataset& dataset) {
  dataset.validate();
  std::vector<Eigen::Index> lab, unlab;
  for (Eigen::Index i = 0; i < dataset.size(); ++i) {
    (dataset.labels[static_cast<std::size_t>(i)] >= 0 ? lab : unlab).push_back(i);
  }
  auto gather = [&](const std::vector<Eigen::Index>& idx) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(idx.size()), dataset.dim());
    std::vector<std::int64_t> ids;
    for (std::size_t k = 0; k < idx.size(); ++k) {
      m.row(static_cast<Eigen::Index>(k)) = dataset.features.row(idx[k]);
      ids.push_back(dataset.ids[static_cast<std::size_t>(idx[k])]);
    }
    return std::make_pair(std::move(m), std::move(ids));
  };
  auto [lab_x, lab_ids] = gather(lab);
  auto [unlab_x, unlab_ids] = gather(unlab);
  std::vector<int> lab_y;
  for (Eigen::Index i : lab) lab_y.push_back(dataset.labels[static_cast<std::size_t>(i)]);
  return {LabeledView(std::move(lab_x), std::move(lab_y), std::move(lab_ids)),
          UnlabeledView(std::move(unlab_x), std::move(unlab_ids))};
}

Eigen::VectorXd augment(const Eigen::VectorXd& features, double sigma, std::uint64_t seed) {
  if (!(sigma >= 0.0)) throw Error(ErrorCode::InvalidArgument, "sigma must be >= 0");
  if (sigma == 0.0) return features;
  Rng rng(seed);
  std::normal_distribution<double> noise(0.0, sigma);
  Eigen::VectorXd out = features;
  for (Eigen::Index j = 0; j < out.size(); ++j) out(j) += noise(rng);
  return out;
}

Eigen::MatrixXd augment_rows(const Eigen::MatrixXd& features, const Eigen::RowVectorXd& sigma,
                             Rng& rng) {
  if (sigma.size() != features.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "noise scale width differs from feature width");
  }
  std::normal_distribution<double> noise(0.0, 1.0);
  Eigen::MatrixXd out = features;
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    for (Eigen::Index j = 0; j < out.cols(); ++j) out(i, j) += sigma(j) * noise(rng);
  }
  return out;
}

}  // namespace spacing
