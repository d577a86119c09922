#include "meanfield/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace meanfield {

Ensemble make_teacher(const TeacherSpec& spec, const ModelConfig& cfg) {
  if (spec.n_teacher < 0) throw std::invalid_argument("n_teacher must be >= 0");
  Rng rng(spec.seed);
  const std::vector<Scalar> taus = draw_uniform_taus(spec.n_teacher, rng);
  const Scalar entry_std = spec.scale / std::sqrt(static_cast<Scalar>(cfg.d2));
  Ensemble teacher = gaussian_ensemble(cfg.d2, entry_std, taus, rng);
  return clamp_to_q_r(teacher, cfg.r);
}

Vector sample_in_ball(Index d, Scalar radius, Rng& rng) {
  Vector g(d);
  for (Index i = 0; i < d; ++i) g[i] = rng.normal();
  const Scalar rad = radius * std::pow(rng.uniform01(), 1.0 / static_cast<Scalar>(d));
  return g.norm() > 0 ? Vector(rad * g / g.norm()) : Vector(Vector::Zero(d));
}

Dataset gen_teacher_student(const TeacherSpec& spec, const ModelConfig& cfg, Index n_samples,
                            Rng& rng) {
  if (n_samples < 1) throw std::invalid_argument("n_samples must be >= 1");
  const Ensemble teacher = make_teacher(spec, cfg);

  Dataset ds;
  ds.samples.reserve(static_cast<std::size_t>(n_samples));
  for (Index k = 0; k < n_samples; ++k) {
    Sample s;
    s.x = sample_in_ball(cfg.d1, cfg.input_radius, rng);
    s.y = cfg.w1.dot(forward(teacher, s.x, cfg).states.back());
    if (spec.noise > 0) s.y += spec.noise * rng.normal();
    ds.attained_input_radius = std::max(ds.attained_input_radius, s.x.norm());
    ds.attained_target_bound = std::max(ds.attained_target_bound, std::abs(s.y));
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

namespace {

Scalar parse_field(const std::string& field, std::size_t line_no) {
  std::size_t pos = 0;
  Scalar v = 0;
  try {
    v = std::stod(field, &pos);
  } catch (const std::exception&) {
    throw std::invalid_argument("csv line " + std::to_string(line_no) + ": bad number '" +
                             field + "'");
  }
  while (pos < field.size() && std::isspace(static_cast<unsigned char>(field[pos]))) ++pos;
  if (pos != field.size())
    throw std::invalid_argument("csv line " + std::to_string(line_no) + ": trailing garbage in '" +
                             field + "'");
  if (!std::isfinite(v))
    throw std::invalid_argument("csv line " + std::to_string(line_no) + ": non-finite value '" +
                             field + "'");
  return v;
}

}  // namespace

Dataset load_csv(const std::string& path, Index d1) {
  if (d1 < 1) throw std::invalid_argument("d1 must be >= 1");
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open '" + path + "'");

  Dataset ds;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::stringstream ss(line);
    std::string field;
    std::vector<Scalar> values;
    while (std::getline(ss, field, ',')) values.push_back(parse_field(field, line_no));
    if (static_cast<Index>(values.size()) != d1 + 1)
      throw std::invalid_argument("csv line " + std::to_string(line_no) + ": expected " +
                               std::to_string(d1 + 1) + " columns, got " +
                               std::to_string(values.size()));
    Sample s;
    s.x = Eigen::Map<const Vector>(values.data(), d1);
    s.y = values.back();
    ds.attained_input_radius = std::max(ds.attained_input_radius, s.x.norm());
    ds.attained_target_bound = std::max(ds.attained_target_bound, std::abs(s.y));
    ds.samples.push_back(std::move(s));
  }
  if (ds.samples.empty()) throw std::invalid_argument("csv file '" + path + "' has no data rows");
  return ds;
}

void save_csv(const Dataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  if (!ds.samples.empty()) {
    const Index d1 = ds.samples.front().x.size();
    out << "#";
    for (Index i = 0; i < d1; ++i) out << " x" << i << ",";
    out << " y\n";
  }
  char buf[64];
  for (const Sample& s : ds.samples) {
    for (Index i = 0; i < s.x.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%.17g", s.x[i]);
      out << buf << ",";
    }
    std::snprintf(buf, sizeof(buf), "%.17g", s.y);
    out << buf << "\n";
  }
  if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

}  // namespace meanfield
