#include "pdegcn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "json_io.hpp"
#include "pdegcn/errors.hpp"
#include "pdegcn/random.hpp"

namespace pdegcn {

namespace {

constexpr std::string_view kMagic = "PDEGCN-CKPT 1\n";

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int k = 0; k < 8; ++k) out.push_back(static_cast<char>((v >> (8 * k)) & 0xff));
}

std::uint64_t get_u64(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int k = 7; k >= 0; --k) v = (v << 8) | p[k];
  return v;
}

void put_block(std::string& out, const FeatureMatrix& m) {
  for (double d : m.values()) put_u64(out, std::bit_cast<std::uint64_t>(d));
}

detail::json shapes_json(const std::vector<FeatureMatrix>& blocks) {
  detail::json out = detail::json::array();
  for (const auto& b : blocks) out.push_back({b.rows(), b.cols()});
  return out;
}

}  // namespace

RunSeeds RunSeeds::from_run_seed(std::uint64_t seed) {
  return {derive_seed(seed, "init"), derive_seed(seed, "dropout"), derive_seed(seed, "split")};
}

ModelParams Checkpoint::to_params() const {
  ModelParams p;
  if (params.size() != config.layers + 3) {
    std::ostringstream msg;
    msg << "checkpoint holds " << params.size() << " parameter blocks, expected " << config.layers + 3;
    throw CheckpointError(msg.str());
  }
  const bool kernels_trainable = config.dynamics != Dynamics::linear_diffusion;
  p.opening = ad::Tensor(params[0], true);
  for (std::size_t l = 0; l < config.layers; ++l) p.layers.push_back({ad::Tensor(params[1 + l], kernels_trainable)});
  p.closing = ad::Tensor(params[config.layers + 1], true);
  p.beta = ad::Tensor(params[config.layers + 2], config.dynamics == Dynamics::mixture);
  return p;
}

std::string architecture_json(const ModelConfig& config, const ModelShape& shape) {
  return detail::json{{"model", detail::model_to_json(config)}, {"shape", detail::shape_to_json(shape)}}.dump();
}

std::string architecture_hash(const ModelConfig& config, const ModelShape& shape) {
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << fnv1a(architecture_json(config, shape));
  return out.str();
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  detail::json header = {
      {"architecture_hash", architecture_hash(ck.config, ck.shape)},
      {"model", detail::model_to_json(ck.config)},
      {"shape", detail::shape_to_json(ck.shape)},
      {"split", detail::split_to_json(ck.split, true)},
      {"row_normalize", ck.row_normalize},
      {"seeds", {{"init", ck.seeds.init}, {"dropout", ck.seeds.dropout}, {"split", ck.seeds.split}}},
      {"epoch", ck.epoch},
      {"params", shapes_json(ck.params)},
  };
  if (ck.optimizer) {
    header["optimizer"] = {{"step", ck.optimizer->step}, {"moments", shapes_json(ck.optimizer->first_moments)}};
    if (ck.optimizer->first_moments.size() != ck.optimizer->second_moments.size()) {
      throw UsageError("save_checkpoint: first and second moment counts differ");
    }
  }
  const std::string header_text = header.dump();
  std::string bytes(kMagic);
  put_u64(bytes, header_text.size());
  bytes += header_text;
  for (const auto& p : ck.params) put_block(bytes, p);
  if (ck.optimizer) {
    for (const auto& m : ck.optimizer->first_moments) put_block(bytes, m);
    for (const auto& v : ck.optimizer->second_moments) put_block(bytes, v);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.flush();
  if (!out) throw DataError("failed writing '" + path.string() + "'");
}

namespace {

std::vector<std::pair<std::size_t, std::size_t>> read_shapes(const detail::json& arr, const char* what) {
  if (!arr.is_array()) throw CheckpointError(std::string("checkpoint header: '") + what + "' is not an array");
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (const auto& s : arr) {
    if (!s.is_array() || s.size() != 2 || !s[0].is_number_unsigned() || !s[1].is_number_unsigned()) {
      throw CheckpointError(std::string("checkpoint header: malformed shape in '") + what + "'");
    }
    out.emplace_back(s[0].get<std::size_t>(), s[1].get<std::size_t>());
  }
  return out;
}

}  // namespace

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string bytes = ss.str();
  const std::string where = "checkpoint '" + path.string() + "'";
  if (bytes.compare(0, kMagic.size(), kMagic) != 0) throw CheckpointError(where + ": bad magic line");
  if (bytes.size() < kMagic.size() + 8) throw CheckpointError(where + ": truncated header");
  const auto* raw = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::uint64_t header_len = get_u64(raw + kMagic.size());
  const std::size_t header_start = kMagic.size() + 8;
  if (header_len > bytes.size() - header_start) throw CheckpointError(where + ": truncated header");

  Checkpoint ck;
  std::vector<std::pair<std::size_t, std::size_t>> param_shapes;
  std::vector<std::pair<std::size_t, std::size_t>> moment_shapes;
  std::string stored_hash;
  try {
    const auto header = detail::json::parse(bytes.substr(header_start, header_len));
    detail::require_keys(header, "checkpoint header",
                         {"architecture_hash", "model", "shape", "split", "row_normalize", "seeds", "epoch", "params",
                          "optimizer"});
    for (const char* key : {"architecture_hash", "model", "shape", "params", "epoch", "seeds"}) {
      if (!header.contains(key)) throw CheckpointError(where + ": header lacks '" + key + "'");
    }
    detail::read_field(header, "checkpoint header", "architecture_hash", stored_hash);
    ck.config = detail::model_from_json(header["model"], "checkpoint model");
    ck.config.validate();
    ck.shape = detail::shape_from_json(header["shape"], "checkpoint shape");
    if (header.contains("split")) ck.split = detail::split_from_json(header["split"], "checkpoint split");
    detail::read_field(header, "checkpoint header", "row_normalize", ck.row_normalize);
    const auto& seeds = header["seeds"];
    detail::require_keys(seeds, "checkpoint seeds", {"init", "dropout", "split"});
    detail::read_field(seeds, "checkpoint seeds", "init", ck.seeds.init);
    detail::read_field(seeds, "checkpoint seeds", "dropout", ck.seeds.dropout);
    detail::read_field(seeds, "checkpoint seeds", "split", ck.seeds.split);
    detail::read_field(header, "checkpoint header", "epoch", ck.epoch);
    param_shapes = read_shapes(header["params"], "params");
    if (header.contains("optimizer")) {
      const auto& opt = header["optimizer"];
      detail::require_keys(opt, "checkpoint optimizer", {"step", "moments"});
      OptimizerSnapshot snap;
      detail::read_field(opt, "checkpoint optimizer", "step", snap.step);
      moment_shapes = read_shapes(opt.at("moments"), "moments");
      ck.optimizer = std::move(snap);
    }
  } catch (const CheckpointError&) {
    throw;
  } catch (const std::exception& e) {
    throw CheckpointError(where + ": unreadable header: " + e.what());
  }
  const std::string expected_hash = architecture_hash(ck.config, ck.shape);
  if (stored_hash != expected_hash) {
    throw CheckpointError(where + ": architecture hash " + stored_hash + " does not match header contents (" +
                          expected_hash + ")");
  }

  std::size_t doubles = 0;
  for (const auto& [r, c] : param_shapes) doubles += r * c;
  for (const auto& [r, c] : moment_shapes) doubles += 2 * r * c;
  const std::size_t payload = bytes.size() - header_start - header_len;
  if (payload != doubles * 8) {
    std::ostringstream msg;
    msg << where << ": payload holds " << payload << " bytes, header describes " << doubles * 8;
    throw CheckpointError(msg.str());
  }
  const unsigned char* p = raw + header_start + header_len;
  auto read_block = [&](std::size_t r, std::size_t c) {
    FeatureMatrix m(r, c);
    for (double& d : m.values()) {
      d = std::bit_cast<double>(get_u64(p));
      p += 8;
    }
    return m;
  };
  for (const auto& [r, c] : param_shapes) ck.params.push_back(read_block(r, c));
  if (ck.optimizer) {
    for (const auto& [r, c] : moment_shapes) ck.optimizer->first_moments.push_back(read_block(r, c));
    for (const auto& [r, c] : moment_shapes) ck.optimizer->second_moments.push_back(read_block(r, c));
  }

  // Parameter layout must agree with the architecture.
  const std::size_t c = ck.config.channels;
  std::vector<std::pair<std::size_t, std::size_t>> expected;
  expected.emplace_back(ck.shape.opening_inputs(), c);
  for (std::size_t l = 0; l < ck.config.layers; ++l) expected.emplace_back(c, c);
  expected.emplace_back(c, ck.shape.output_channels);
  expected.emplace_back(1, 1);
  if (param_shapes != expected) throw CheckpointError(where + ": parameter shapes disagree with the architecture");
  if (ck.optimizer && moment_shapes != expected) {
    throw CheckpointError(where + ": optimizer moment shapes disagree with the architecture");
  }
  return ck;
}

Checkpoint load_checkpoint(const std::filesystem::path& path, const ModelConfig& expected_config,
                           const ModelShape& expected_shape) {
  Checkpoint ck = load_checkpoint(path);
  if (!(ck.config == expected_config) || !(ck.shape == expected_shape)) {
    throw CheckpointError("checkpoint '" + path.string() + "' has architecture " +
                          architecture_hash(ck.config, ck.shape) + " but " +
                          architecture_hash(expected_config, expected_shape) + " was expected: " +
                          architecture_json(expected_config, expected_shape));
  }
  return ck;
}

}  // namespace pdegcn
