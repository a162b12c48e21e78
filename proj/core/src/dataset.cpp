#include "pdegcn/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "pdegcn/errors.hpp"
#include "pdegcn/random.hpp"
#include "text_io.hpp"

namespace pdegcn {

namespace fs = std::filesystem;

std::vector<std::size_t> SplitMasks::indices(const std::vector<bool>& mask) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i]) out.push_back(i);
  }
  return out;
}

void Dataset::validate() const {
  const std::size_t n = graph.vertex_count();
  if (features.rows() != n) {
    std::ostringstream msg;
    msg << "dataset: " << features.rows() << " feature rows for " << n << " vertices";
    throw DataError(msg.str());
  }
  if (labels.size() != n) {
    std::ostringstream msg;
    msg << "dataset: " << labels.size() << " labels for " << n << " vertices";
    throw DataError(msg.str());
  }
  if (edge_features && edge_features->rows() != graph.edge_count()) {
    std::ostringstream msg;
    msg << "dataset: " << edge_features->rows() << " edge feature rows for " << graph.edge_count() << " edges";
    throw DataError(msg.str());
  }
  int max_label = -1;
  for (std::size_t v = 0; v < n; ++v) {
    if (labels[v] < -1) {
      std::ostringstream msg;
      msg << "dataset: negative label " << labels[v] << " at vertex " << v;
      throw DataError(msg.str());
    }
    max_label = std::max(max_label, labels[v]);
  }
  if (max_label >= 0 && class_count != static_cast<std::size_t>(max_label) + 1) {
    std::ostringstream msg;
    msg << "dataset: class_count " << class_count << " but the largest label is " << max_label;
    throw DataError(msg.str());
  }
  if (masks.empty()) return;
  if (masks.train.size() != n || masks.val.size() != n || masks.test.size() != n) {
    throw DataError("dataset: mask lengths differ from the vertex count");
  }
  for (std::size_t v = 0; v < n; ++v) {
    const int hits = int(masks.train[v]) + int(masks.val[v]) + int(masks.test[v]);
    if (hits > 1) {
      std::ostringstream msg;
      msg << "dataset: vertex " << v << " appears in more than one mask";
      throw DataError(msg.str());
    }
    if (hits == 1 && labels[v] < 0) {
      std::ostringstream msg;
      msg << "dataset: masked vertex " << v << " has no label";
      throw DataError(msg.str());
    }
  }
}

void row_normalize(FeatureMatrix& features) {
  for (std::size_t r = 0; r < features.rows(); ++r) {
    auto row = features.row(r);
    double s = 0.0;
    for (double v : row) s += v;
    if (s == 0.0) continue;
    for (double& v : row) v /= s;
  }
}

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Calls fn(line_number, line) for every non-blank line.
template <typename F>
void for_each_line(const std::string& text, F fn) {
  std::size_t start = 0;
  std::size_t number = 0;
  while (start <= text.size()) {
    const std::size_t end = std::min(text.find('\n', start), text.size());
    ++number;
    const std::string_view line = detail::trim(std::string_view(text).substr(start, end - start));
    if (!line.empty()) fn(number, line);
    if (end == text.size()) break;
    start = end + 1;
  }
}

[[noreturn]] void line_error(const fs::path& path, std::size_t line, const std::string& what) {
  std::ostringstream msg;
  msg << path.string() << ":" << line << ": " << what;
  throw DataError(msg.str());
}

}  // namespace

Dataset load_citation(const fs::path& content, const fs::path& cites, const LoadOptions& options) {
  const std::string content_text = read_file(content);
  std::unordered_map<std::string, std::size_t> index;
  std::vector<std::string> label_names;
  std::vector<double> values;
  std::size_t width = 0;
  for_each_line(content_text, [&](std::size_t number, std::string_view line) {
    const auto tokens = detail::split_whitespace(line);
    if (tokens.size() < 3) line_error(content, number, "expected 'id features... label'");
    const std::size_t w = tokens.size() - 2;
    if (index.empty()) {
      width = w;
    } else if (w != width) {
      std::ostringstream msg;
      msg << "expected " << width << " features, found " << w;
      line_error(content, number, msg.str());
    }
    const std::string id(tokens.front());
    if (!index.emplace(id, index.size()).second) line_error(content, number, "duplicate node id '" + id + "'");
    for (std::size_t k = 1; k + 1 < tokens.size(); ++k) {
      const auto v = detail::parse_double(tokens[k]);
      if (!v) line_error(content, number, "malformed feature value '" + std::string(tokens[k]) + "'");
      values.push_back(*v);
    }
    label_names.emplace_back(tokens.back());
  });
  if (index.empty()) throw DataError("'" + content.string() + "' holds no nodes");

  Dataset ds;
  ds.class_names = label_names;
  std::sort(ds.class_names.begin(), ds.class_names.end());
  ds.class_names.erase(std::unique(ds.class_names.begin(), ds.class_names.end()), ds.class_names.end());
  ds.class_count = ds.class_names.size();
  ds.labels.reserve(label_names.size());
  for (const auto& name : label_names) {
    const auto it = std::lower_bound(ds.class_names.begin(), ds.class_names.end(), name);
    ds.labels.push_back(static_cast<int>(it - ds.class_names.begin()));
  }
  const std::size_t n = index.size();
  ds.features = FeatureMatrix(n, width, std::move(values));
  if (options.row_normalize) row_normalize(ds.features);

  const std::string cites_text = read_file(cites);
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for_each_line(cites_text, [&](std::size_t number, std::string_view line) {
    const auto tokens = detail::split_whitespace(line);
    if (tokens.size() != 2) line_error(cites, number, "expected 'cited citing'");
    ++ds.citation_records;
    const auto a = index.find(std::string(tokens[0]));
    const auto b = index.find(std::string(tokens[1]));
    if (a == index.end() || b == index.end()) {
      ++ds.dropped_citations;
      return;
    }
    pairs.emplace_back(a->second, b->second);
  });
  ds.graph = build_graph(n, pairs);
  ds.validate();
  return ds;
}

std::string_view to_string(SplitMode mode) {
  return mode == SplitMode::standard_semi ? "standard_semi" : "fractional";
}

SplitMode parse_split_mode(std::string_view name) {
  if (name == "standard_semi") return SplitMode::standard_semi;
  if (name == "fractional") return SplitMode::fractional;
  throw UsageError("unknown split mode '" + std::string(name) + "' (expected standard_semi or fractional)");
}

namespace {

void shuffle(std::vector<std::size_t>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::size_t j = rng.below(i);
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace

SplitMasks make_split(const Dataset& dataset, const SplitSpec& spec) {
  const std::size_t n = dataset.labels.size();
  SplitMasks masks{std::vector<bool>(n), std::vector<bool>(n), std::vector<bool>(n)};
  Rng rng(spec.seed);
  std::vector<std::vector<std::size_t>> by_class(dataset.class_count);
  std::vector<std::size_t> labeled;
  for (std::size_t v = 0; v < n; ++v) {
    if (dataset.labels[v] < 0) continue;
    labeled.push_back(v);
    by_class[static_cast<std::size_t>(dataset.labels[v])].push_back(v);
  }

  if (spec.mode == SplitMode::standard_semi) {
    for (std::size_t c = 0; c < by_class.size(); ++c) {
      if (by_class[c].size() < spec.per_class) {
        std::ostringstream msg;
        msg << "split: class " << c << " has " << by_class[c].size() << " labeled vertices, fewer than "
            << spec.per_class;
        throw DataError(msg.str());
      }
    }
    if (labeled.size() < spec.per_class * by_class.size() + spec.val_count + spec.test_count) {
      std::ostringstream msg;
      msg << "split: " << labeled.size() << " labeled vertices cannot hold " << spec.per_class << " per class plus "
          << spec.val_count << " validation and " << spec.test_count << " test vertices";
      throw DataError(msg.str());
    }
    shuffle(labeled, rng);
    std::vector<std::size_t> taken(by_class.size(), 0);
    std::vector<std::size_t> rest;
    for (std::size_t v : labeled) {
      auto& t = taken[static_cast<std::size_t>(dataset.labels[v])];
      if (t < spec.per_class) {
        masks.train[v] = true;
        ++t;
      } else {
        rest.push_back(v);
      }
    }
    for (std::size_t k = 0; k < spec.val_count; ++k) masks.val[rest[k]] = true;
    for (std::size_t k = spec.val_count; k < spec.val_count + spec.test_count; ++k) masks.test[rest[k]] = true;
    return masks;
  }

  if (!(spec.train_fraction > 0.0 && spec.val_fraction >= 0.0 && spec.train_fraction + spec.val_fraction <= 1.0)) {
    throw UsageError("split: fractions must satisfy 0 < train, 0 <= val, train + val <= 1");
  }
  for (auto& members : by_class) {
    shuffle(members, rng);
    const double size = static_cast<double>(members.size());
    const auto n_train = static_cast<std::size_t>(std::floor(spec.train_fraction * size + 0.5));
    const auto n_val = std::min(members.size() - n_train,
                                static_cast<std::size_t>(std::floor(spec.val_fraction * size + 0.5)));
    for (std::size_t k = 0; k < members.size(); ++k) {
      if (k < n_train) {
        masks.train[members[k]] = true;
      } else if (k < n_train + n_val) {
        masks.val[members[k]] = true;
      } else {
        masks.test[members[k]] = true;
      }
    }
  }
  return masks;
}

namespace {

FeatureMatrix read_matrix_csv(const fs::path& path, std::size_t expected_rows) {
  const std::string text = read_file(path);
  std::vector<double> values;
  std::size_t rows = 0;
  std::size_t width = 0;
  for_each_line(text, [&](std::size_t number, std::string_view line) {
    const auto cells = detail::split(line, ',');
    if (rows == 0) {
      width = cells.size();
    } else if (cells.size() != width) {
      std::ostringstream msg;
      msg << "expected " << width << " columns, found " << cells.size();
      line_error(path, number, msg.str());
    }
    for (auto cell : cells) {
      const auto v = detail::parse_double(cell);
      if (!v) line_error(path, number, "malformed number '" + std::string(cell) + "'");
      values.push_back(*v);
    }
    ++rows;
  });
  if (rows != expected_rows) {
    std::ostringstream msg;
    msg << path.string() << ": expected " << expected_rows << " rows, found " << rows;
    throw DataError(msg.str());
  }
  return FeatureMatrix(rows, width, std::move(values));
}

std::size_t meta_count(const nlohmann::json& meta, const char* key, const fs::path& path) {
  if (!meta.contains(key) || !meta[key].is_number_unsigned()) {
    throw DataError(path.string() + ": '" + key + "' must be a non-negative integer");
  }
  return meta[key].get<std::size_t>();
}

bool is_flag(std::string_view s) { return s == "0" || s == "1"; }

}  // namespace

Dataset load_bundle(const fs::path& dir, const LoadOptions& options) {
  const fs::path meta_path = dir / "meta.json";
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(read_file(meta_path));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(meta_path.string() + ": " + e.what());
  }
  const std::size_t n = meta_count(meta, "n", meta_path);
  const std::size_t m = meta_count(meta, "m", meta_path);
  const std::size_t channels = meta_count(meta, "channels", meta_path);
  const std::size_t classes = meta_count(meta, "classes", meta_path);

  Dataset ds;
  const fs::path edges_path = dir / "edges.csv";
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for_each_line(read_file(edges_path), [&](std::size_t number, std::string_view line) {
    const auto cells = detail::split(line, ',');
    const auto a = cells.size() == 2 ? detail::parse_int(cells[0]) : std::nullopt;
    const auto b = cells.size() == 2 ? detail::parse_int(cells[1]) : std::nullopt;
    if (!a || !b || *a < 0 || *b < 0) line_error(edges_path, number, "expected 'i,j' with non-negative indices");
    pairs.emplace_back(static_cast<std::size_t>(*a), static_cast<std::size_t>(*b));
  });
  if (pairs.size() != m) {
    std::ostringstream msg;
    msg << edges_path.string() << ": meta.json declares m = " << m << " but the file lists " << pairs.size()
        << " edges";
    throw DataError(msg.str());
  }
  ds.graph = build_graph(n, pairs);

  ds.features = read_matrix_csv(dir / "features.csv", n);
  if (ds.features.cols() != channels) {
    std::ostringstream msg;
    msg << "features.csv has " << ds.features.cols() << " columns, meta.json declares " << channels;
    throw DataError(msg.str());
  }
  if (options.row_normalize) row_normalize(ds.features);

  const fs::path edge_features_path = dir / "edge_features.csv";
  if (fs::exists(edge_features_path)) {
    const FeatureMatrix raw = read_matrix_csv(edge_features_path, m);
    if (ds.graph.edge_count() != m) {
      throw DataError(edge_features_path.string() +
                      ": edge features need an edge list without duplicates or self-loops");
    }
    FeatureMatrix aligned(m, raw.cols());
    for (std::size_t k = 0; k < m; ++k) {
      const std::size_t e = *ds.graph.find_edge(pairs[k].first, pairs[k].second);
      for (std::size_t c = 0; c < raw.cols(); ++c) aligned(e, c) = raw(k, c);
    }
    ds.edge_features = std::move(aligned);
  }

  const fs::path labels_path = dir / "labels.csv";
  for_each_line(read_file(labels_path), [&](std::size_t number, std::string_view line) {
    const auto v = detail::parse_int(line);
    if (!v || *v < -1 || *v >= static_cast<long long>(classes)) {
      line_error(labels_path, number, "label must be -1 or in [0, classes)");
    }
    ds.labels.push_back(static_cast<int>(*v));
  });
  if (ds.labels.size() != n) {
    std::ostringstream msg;
    msg << labels_path.string() << ": expected " << n << " labels, found " << ds.labels.size();
    throw DataError(msg.str());
  }
  ds.class_count = classes;
  if (meta.contains("class_names")) {
    ds.class_names = meta["class_names"].get<std::vector<std::string>>();
  }

  const fs::path masks_path = dir / "masks.csv";
  if (fs::exists(masks_path)) {
    for_each_line(read_file(masks_path), [&](std::size_t number, std::string_view line) {
      const auto cells = detail::split(line, ',');
      if (number == 1 && cells.size() == 3 && cells[0] == "train") return;
      if (cells.size() != 3 || !is_flag(cells[0]) || !is_flag(cells[1]) || !is_flag(cells[2])) {
        line_error(masks_path, number, "expected 'train,val,test' flags of 0 or 1");
      }
      ds.masks.train.push_back(cells[0] == "1");
      ds.masks.val.push_back(cells[1] == "1");
      ds.masks.test.push_back(cells[2] == "1");
    });
    if (ds.masks.train.size() != n) {
      std::ostringstream msg;
      msg << masks_path.string() << ": expected " << n << " rows, found " << ds.masks.train.size();
      throw DataError(msg.str());
    }
  }
  ds.validate();
  return ds;
}

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
  out << text;
  out.flush();
  if (!out) throw DataError("failed writing '" + path.string() + "'");
}

std::string matrix_csv(const FeatureMatrix& m) {
  std::string out;
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) {
      if (c) out += ',';
      out += detail::format_double(m(r, c));
    }
    out += '\n';
  }
  return out;
}

}  // namespace

void save_bundle(const Dataset& dataset, const fs::path& dir) {
  dataset.validate();
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create directory '" + dir.string() + "': " + ec.message());
  nlohmann::json meta = {{"n", dataset.graph.vertex_count()},
                         {"m", dataset.graph.edge_count()},
                         {"channels", dataset.features.cols()},
                         {"classes", dataset.class_count}};
  if (!dataset.class_names.empty()) meta["class_names"] = dataset.class_names;
  write_text(dir / "meta.json", meta.dump(2) + "\n");

  std::string edges;
  for (const auto& e : dataset.graph.edges()) edges += std::to_string(e.i) + "," + std::to_string(e.j) + "\n";
  write_text(dir / "edges.csv", edges);
  write_text(dir / "features.csv", matrix_csv(dataset.features));
  if (dataset.edge_features) write_text(dir / "edge_features.csv", matrix_csv(*dataset.edge_features));

  std::string labels;
  for (int l : dataset.labels) labels += std::to_string(l) + "\n";
  write_text(dir / "labels.csv", labels);

  if (!dataset.masks.empty()) {
    std::string masks = "train,val,test\n";
    for (std::size_t v = 0; v < dataset.labels.size(); ++v) {
      masks += dataset.masks.train[v] ? "1," : "0,";
      masks += dataset.masks.val[v] ? "1," : "0,";
      masks += dataset.masks.test[v] ? "1\n" : "0\n";
    }
    write_text(dir / "masks.csv", masks);
  } else {
    fs::remove(dir / "masks.csv", ec);
  }
}

Dataset load_dataset(const fs::path& path, const LoadOptions& options) {
  if (!fs::is_directory(path)) throw DataError("dataset path '" + path.string() + "' is not a directory");
  if (fs::exists(path / "meta.json")) return load_bundle(path, options);
  std::vector<fs::path> content;
  std::vector<fs::path> cites;
  for (const auto& entry : fs::directory_iterator(path)) {
    if (entry.path().extension() == ".content") content.push_back(entry.path());
    if (entry.path().extension() == ".cites") cites.push_back(entry.path());
  }
  if (content.size() != 1 || cites.size() != 1) {
    throw DataError("'" + path.string() + "' holds neither meta.json nor exactly one *.content and one *.cites file");
  }
  return load_citation(content.front(), cites.front(), options);
}

}  // namespace pdegcn
