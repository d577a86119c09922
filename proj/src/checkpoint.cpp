#include "meanfield/checkpoint.hpp"

#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace meanfield {

using nlohmann::json;

namespace {

std::string hex(Scalar v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%a", v);
  return buf;
}

Scalar unhex(const std::string& s) {
  char* end = nullptr;
  const Scalar v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0')
    throw std::invalid_argument("checkpoint: bad float literal '" + s + "'");
  return v;
}

json matrix_to_json(const Matrix& m) {
  json arr = json::array();
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) arr.push_back(hex(m(i, j)));
  return arr;
}

Matrix matrix_from_json(const json& arr, Index rows, Index cols) {
  if (static_cast<Index>(arr.size()) != rows * cols)
    throw std::invalid_argument("checkpoint: matrix entry count mismatch");
  Matrix m(rows, cols);
  Index k = 0;
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = unhex(arr.at(k++).get<std::string>());
  return m;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  json j;
  j["version"] = ckpt.version;
  j["config"] = json::parse(serialize_run_config(ckpt.config));
  j["epoch"] = ckpt.state.epoch;
  j["step"] = ckpt.state.step;
  j["rng_note"] = ckpt.rng_note;

  json particles = json::array();
  for (const Particle& p : ckpt.state.ensemble.particles) {
    particles.push_back({{"id", p.id},
                         {"tau", hex(p.tau)},
                         {"rows", p.theta.rows()},
                         {"cols", p.theta.cols()},
                         {"theta", matrix_to_json(p.theta)}});
  }
  j["ensemble"] = {{"sorted", ckpt.state.ensemble.sorted}, {"particles", particles}};

  json tv = json::array();
  for (const Matrix& m : ckpt.state.theta_velocity)
    tv.push_back({{"rows", m.rows()}, {"cols", m.cols()}, {"data", matrix_to_json(m)}});
  j["theta_velocity"] = tv;

  json sv = json::array();
  for (Scalar v : ckpt.state.tau_velocity) sv.push_back(hex(v));
  j["tau_velocity"] = sv;

  json hist = json::array();
  for (const MetricsRecord& r : ckpt.state.history)
    hist.push_back({{"step", r.step},
                    {"epoch", r.epoch},
                    {"train_loss", hex(r.train_loss)},
                    {"eval_loss", hex(r.eval_loss)},
                    {"wallclock_s", r.wallclock_s}});
  j["history"] = hist;

  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw std::runtime_error("cannot write checkpoint '" + tmp + "'");
    out << j.dump(1) << "\n";
    if (!out) throw std::runtime_error("checkpoint write to '" + tmp + "' failed");
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open checkpoint '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& ex) {
    throw std::invalid_argument(std::string("checkpoint is not valid JSON: ") + ex.what());
  }

  Checkpoint ckpt;
  ckpt.version = j.at("version").get<std::string>();
  if (ckpt.version != Checkpoint{}.version)
    throw std::invalid_argument("unsupported checkpoint version '" + ckpt.version + "'");
  ckpt.config = parse_run_config(j.at("config").dump());
  ckpt.state.epoch = j.at("epoch").get<Index>();
  ckpt.state.step = j.at("step").get<Index>();
  ckpt.rng_note = j.value("rng_note", std::string());

  for (const json& pj : j.at("ensemble").at("particles")) {
    Particle p;
    p.id = pj.at("id").get<std::int64_t>();
    p.tau = unhex(pj.at("tau").get<std::string>());
    p.theta = matrix_from_json(pj.at("theta"), pj.at("rows").get<Index>(),
                               pj.at("cols").get<Index>());
    ckpt.state.ensemble.particles.push_back(std::move(p));
  }
  ckpt.state.ensemble.sorted = j.at("ensemble").at("sorted").get<bool>();

  for (const json& mj : j.at("theta_velocity"))
    ckpt.state.theta_velocity.push_back(
        matrix_from_json(mj.at("data"), mj.at("rows").get<Index>(), mj.at("cols").get<Index>()));
  for (const json& vj : j.at("tau_velocity"))
    ckpt.state.tau_velocity.push_back(unhex(vj.get<std::string>()));

  for (const json& rj : j.at("history")) {
    MetricsRecord r;
    r.step = rj.at("step").get<Index>();
    r.epoch = rj.at("epoch").get<Index>();
    r.train_loss = unhex(rj.at("train_loss").get<std::string>());
    r.eval_loss = unhex(rj.at("eval_loss").get<std::string>());
    r.wallclock_s = rj.at("wallclock_s").get<Scalar>();
    ckpt.state.history.push_back(r);
  }

  if (ckpt.state.theta_velocity.size() != ckpt.state.ensemble.particles.size() ||
      ckpt.state.tau_velocity.size() != ckpt.state.ensemble.particles.size())
    throw std::invalid_argument("checkpoint: velocity buffers do not match the ensemble");
  return ckpt;
}

bool resume_compatible(const RunConfig& a, const RunConfig& b) {
  json ja = json::parse(serialize_run_config(a));
  json jb = json::parse(serialize_run_config(b));
  for (json* j : {&ja, &jb}) {
    j->at("train").erase("epochs");
    j->erase("checkpoint_every");
  }
  return ja == jb;
}

}  // namespace meanfield
