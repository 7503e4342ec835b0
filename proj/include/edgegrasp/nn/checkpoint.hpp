#pragma once

// Checkpoint container:
//   bytes 0..3   magic "EGCK"
//   u32          format version (little-endian)
//   u64          header length in bytes (little-endian)
//   header       UTF-8 JSON: model config, tensor shapes, training config and
//                state, run config echo, blob table
//   blobs        little-endian IEEE-754 doubles, in blob-table order
// Blobs: "best" (parameters with the best monitored loss), "last" (current
// parameters), "adam_m" and "adam_v" (optimizer moments).

#include "edgegrasp/nn/train.hpp"

#include <json.hpp>

#include <bit>
#include <filesystem>
#include <fstream>

namespace edgegrasp::nn {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  ModelConfig model;
  TrainConfig train;
  TrainState state;
  nlohmann::json scheduler;
  long adam_steps = 0;
  nlohmann::json config = nlohmann::json::object();
  Vec last;
  Vec adam_m;
  Vec adam_v;
};

namespace detail {

inline Vec flatten_mats(const std::vector<Mat>& ms) {
  Eigen::Index n = 0;
  for (const auto& m : ms) n += m.size();
  Vec out(n);
  Eigen::Index off = 0;
  for (const auto& m : ms) {
    out.segment(off, m.size()) = Eigen::Map<const Vec>(m.data(), m.size());
    off += m.size();
  }
  return out;
}

inline void unflatten_mats(const Vec& v, std::vector<Mat>& ms) {
  Eigen::Index off = 0;
  for (auto& m : ms) {
    if (off + m.size() > v.size()) throw data_error("optimizer state has wrong length");
    Eigen::Map<Vec>(m.data(), m.size()) = v.segment(off, m.size());
    off += m.size();
  }
  if (off != v.size()) throw data_error("optimizer state has wrong length");
}

inline void put_u64(std::ostream& os, std::uint64_t x) {
  for (int i = 0; i < 8; ++i) os.put(static_cast<char>((x >> (8 * i)) & 0xff));
}

inline std::uint64_t get_u64(std::istream& is, int bytes = 8) {
  std::uint64_t x = 0;
  for (int i = 0; i < bytes; ++i) {
    const int c = is.get();
    if (c == EOF) throw data_error("checkpoint is truncated");
    x |= static_cast<std::uint64_t>(static_cast<unsigned char>(c)) << (8 * i);
  }
  return x;
}

inline nlohmann::json finite_or_null(double x) { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(); }
inline double null_as(const nlohmann::json& j, double fallback) { return j.is_null() ? fallback : j.get<double>(); }

}  // namespace detail

/// Snapshot of a trainer; `config` is echoed verbatim.
inline Checkpoint make_checkpoint(const Trainer& t, const EdgeNet& net, const nlohmann::json& config) {
  Checkpoint c;
  c.model = net.config();
  c.train = t.config();
  c.state = t.state();
  if (c.state.best_params.size() == 0) c.state.best_params = net.params().flat_values();
  c.scheduler = t.scheduler().to_json();
  c.adam_steps = t.optimizer().steps();
  c.config = config;
  c.last = net.params().flat_values();
  c.adam_m = detail::flatten_mats(t.optimizer().first_moment());
  c.adam_v = detail::flatten_mats(t.optimizer().second_moment());
  return c;
}

inline void write_checkpoint(std::ostream& os, const Checkpoint& c, const ParamSet& shapes_from) {
  nlohmann::json history = nlohmann::json::array();
  for (const auto& h : c.state.history)
    history.push_back({{"epoch", h.epoch},
                       {"train_loss", detail::finite_or_null(h.train_loss)},
                       {"val_loss", detail::finite_or_null(h.val_loss)},
                       {"train_accuracy", h.train_accuracy},
                       {"lr", h.lr}});
  const std::vector<std::pair<std::string, const Vec*>> blobs{
      {"best", &c.state.best_params}, {"last", &c.last}, {"adam_m", &c.adam_m}, {"adam_v", &c.adam_v}};
  nlohmann::json table = nlohmann::json::array();
  for (const auto& [name, v] : blobs) table.push_back({{"name", name}, {"count", v->size()}});
  nlohmann::json scheduler = c.scheduler;
  scheduler["best"] = detail::finite_or_null(scheduler.value("best", 0.0));
  const nlohmann::json header{{"format", "edgegrasp-checkpoint"},
                              {"version", kCheckpointVersion},
                              {"model", c.model.to_json()},
                              {"shapes", shapes_from.shapes()},
                              {"train", c.train.to_json()},
                              {"seed", c.train.seed},
                              {"epoch", c.state.epoch},
                              {"best_epoch", c.state.best_epoch},
                              {"best_loss", detail::finite_or_null(c.state.best_val)},
                              {"scheduler", scheduler},
                              {"adam_steps", c.adam_steps},
                              {"history", history},
                              {"config", c.config},
                              {"blobs", table}};
  const std::string text = header.dump();
  os.write("EGCK", 4);
  for (int i = 0; i < 4; ++i) os.put(static_cast<char>((kCheckpointVersion >> (8 * i)) & 0xff));
  detail::put_u64(os, text.size());
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& [name, v] : blobs)
    for (Eigen::Index i = 0; i < v->size(); ++i) detail::put_u64(os, std::bit_cast<std::uint64_t>((*v)[i]));
  if (!os) throw data_error("failed to write checkpoint");
}

inline Checkpoint read_checkpoint(std::istream& is) {
  char magic[4] = {};
  if (!is.read(magic, 4) || std::string(magic, 4) != "EGCK") throw data_error("not an edgegrasp checkpoint");
  const auto version = static_cast<std::uint32_t>(detail::get_u64(is, 4));
  if (version != kCheckpointVersion) throw data_error("unsupported checkpoint version " + std::to_string(version));
  const std::uint64_t len = detail::get_u64(is);
  if (len > (1ull << 32)) throw data_error("checkpoint header is implausibly large");
  std::string text(len, '\0');
  if (!is.read(text.data(), static_cast<std::streamsize>(len))) throw data_error("checkpoint is truncated");
  Checkpoint c;
  try {
    const auto h = nlohmann::json::parse(text);
    c.model = ModelConfig::from_json(h.at("model"));
    const auto& t = h.at("train");
    c.train.epochs = t.at("epochs").get<int>();
    c.train.batch_regions = t.at("batch_regions").get<int>();
    c.train.lr = t.at("lr").get<double>();
    c.train.patience = t.at("patience").get<int>();
    c.train.min_delta = t.at("min_delta").get<double>();
    c.train.lr_factor = t.at("lr_factor").get<double>();
    c.train.augment = t.at("augment").get<bool>();
    c.train.seed = t.at("seed").get<std::uint64_t>();
    c.state.epoch = h.at("epoch").get<int>();
    c.state.best_epoch = h.at("best_epoch").get<int>();
    c.state.best_val = detail::null_as(h.at("best_loss"), std::numeric_limits<double>::infinity());
    for (const auto& e : h.at("history")) {
      EpochLog log;
      log.epoch = e.at("epoch").get<int>();
      log.train_loss = detail::null_as(e.at("train_loss"), std::numeric_limits<double>::quiet_NaN());
      log.val_loss = detail::null_as(e.at("val_loss"), std::numeric_limits<double>::quiet_NaN());
      log.train_accuracy = e.at("train_accuracy").get<double>();
      log.lr = e.at("lr").get<double>();
      c.state.history.push_back(log);
    }
    c.scheduler = h.at("scheduler");
    c.adam_steps = h.at("adam_steps").get<long>();
    c.config = h.at("config");
    std::vector<Vec*> targets{&c.state.best_params, &c.last, &c.adam_m, &c.adam_v};
    const auto& table = h.at("blobs");
    if (table.size() != targets.size()) throw data_error("checkpoint blob table is malformed");
    for (std::size_t b = 0; b < targets.size(); ++b) {
      const auto n = table[b].at("count").get<Eigen::Index>();
      Vec& v = *targets[b];
      v.resize(n);
      for (Eigen::Index i = 0; i < n; ++i) v[i] = std::bit_cast<double>(detail::get_u64(is));
    }
  } catch (const nlohmann::json::exception& e) {
    throw data_error(std::string("malformed checkpoint header: ") + e.what());
  }
  if (is.peek() != EOF) throw data_error("checkpoint has trailing bytes");
  return c;
}

inline void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c, const ParamSet& shapes_from) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw data_error("cannot open checkpoint for writing: " + path.string());
  write_checkpoint(os, c, shapes_from);
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw data_error("cannot open checkpoint: " + path.string());
  return read_checkpoint(is);
}

/// Network holding the best parameters of a checkpoint.
inline std::unique_ptr<EdgeNet> load_model(const Checkpoint& c) {
  auto net = make_net(c.model, c.train.seed);
  net->params().set_flat_values(c.state.best_params);
  return net;
}

/// Restores the last parameters, optimizer and scheduler so training resumes
/// exactly where it stopped.
inline void restore_trainer(Trainer& t, EdgeNet& net, const Checkpoint& c) {
  net.params().set_flat_values(c.last);
  detail::unflatten_mats(c.adam_m, t.optimizer().first_moment());
  detail::unflatten_mats(c.adam_v, t.optimizer().second_moment());
  t.optimizer().set_steps(c.adam_steps);
  nlohmann::json sched = c.scheduler;
  t.scheduler().load(sched);
  t.state() = c.state;
}

}  // namespace edgegrasp::nn
