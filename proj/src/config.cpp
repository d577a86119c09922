#include "meanfield/config.hpp"

#include <json.hpp>

#include <fstream>
#include <initializer_list>
#include <set>
#include <sstream>
#include <stdexcept>

namespace meanfield {

using nlohmann::json;

namespace {

void check_keys(const json& j, const std::string& section,
                std::initializer_list<const char*> allowed) {
  if (!j.is_object())
    throw std::invalid_argument("config section '" + section + "' must be an object");
  const std::set<std::string> known(allowed.begin(), allowed.end());
  for (const auto& item : j.items())
    if (!known.count(item.key()))
      throw std::invalid_argument("unknown config key '" + section + "." + item.key() + "'");
}

template <typename T>
T get_or(const json& j, const char* key, T def) {
  if (!j.contains(key)) return def;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw std::invalid_argument(std::string("config key '") + key + "' has the wrong type");
  }
}

std::vector<Scalar> get_scalars(const json& j, const char* key, std::vector<Scalar> def) {
  if (!j.contains(key)) return def;
  return j.at(key).get<std::vector<Scalar>>();
}

std::vector<Index> get_indices(const json& j, const char* key, std::vector<Index> def) {
  if (!j.contains(key)) return def;
  return j.at(key).get<std::vector<Index>>();
}

ModelSettings parse_model(const json& j) {
  check_keys(j, "model",
             {"d1", "d2", "activation", "r", "input_radius", "target_bound", "tail_mode",
              "w2_mode", "w2_seed", "w1_mode"});
  ModelSettings m;
  m.d1 = get_or<Index>(j, "d1", m.d1);
  m.d2 = get_or<Index>(j, "d2", m.d2);
  m.act = parse_activation(get_or<std::string>(j, "activation", to_string(m.act)));
  m.r = get_or<Scalar>(j, "r", m.r);
  m.input_radius = get_or<Scalar>(j, "input_radius", m.input_radius);
  m.target_bound = get_or<Scalar>(j, "target_bound", m.target_bound);
  m.tail_mode = parse_tail_mode(get_or<std::string>(j, "tail_mode", to_string(m.tail_mode)));
  const std::string w2 = get_or<std::string>(j, "w2_mode", "identity");
  if (w2 == "identity")
    m.w2_mode = W2Mode::Identity;
  else if (w2 == "orthonormal")
    m.w2_mode = W2Mode::Orthonormal;
  else
    throw std::invalid_argument("unknown w2_mode: '" + w2 + "'");
  m.w2_seed = get_or<std::uint64_t>(j, "w2_seed", m.w2_seed);
  const std::string w1 = get_or<std::string>(j, "w1_mode", "average");
  if (w1 == "average")
    m.w1_mode = W1Mode::Average;
  else if (w1 == "basis")
    m.w1_mode = W1Mode::Basis;
  else
    throw std::invalid_argument("unknown w1_mode: '" + w1 + "'");
  return m;
}

TrainConfig parse_train(const json& j) {
  check_keys(j, "train",
             {"n_particles", "lr", "lr_schedule", "momentum", "weight_decay", "epochs",
              "batch_size", "seed", "mode", "tau_init", "theta_init_scale", "clamp_r",
              "tau_lr_scale", "eval_fraction"});
  TrainConfig t;
  t.n_particles = get_or<Index>(j, "n_particles", t.n_particles);
  t.lr = get_or<Scalar>(j, "lr", t.lr);
  if (j.contains("lr_schedule")) {
    t.lr_schedule.clear();
    for (const auto& entry : j.at("lr_schedule")) {
      if (!entry.is_array() || entry.size() != 2)
        throw std::invalid_argument("lr_schedule entries must be [epoch, factor] pairs");
      t.lr_schedule.push_back({entry.at(0).get<Index>(), entry.at(1).get<Scalar>()});
    }
  }
  t.momentum = get_or<Scalar>(j, "momentum", t.momentum);
  t.weight_decay = get_or<Scalar>(j, "weight_decay", t.weight_decay);
  t.epochs = get_or<Index>(j, "epochs", t.epochs);
  t.batch_size = get_or<Index>(j, "batch_size", t.batch_size);
  t.seed = get_or<std::uint64_t>(j, "seed", t.seed);
  t.mode = parse_train_mode(get_or<std::string>(j, "mode", to_string(t.mode)));
  t.tau_init = parse_tau_init(get_or<std::string>(j, "tau_init", to_string(t.tau_init)));
  t.theta_init_scale = get_or<Scalar>(j, "theta_init_scale", t.theta_init_scale);
  t.clamp_r = get_or<Scalar>(j, "clamp_r", t.clamp_r);
  t.tau_lr_scale = get_or<Scalar>(j, "tau_lr_scale", t.tau_lr_scale);
  t.eval_fraction = get_or<Scalar>(j, "eval_fraction", t.eval_fraction);
  return t;
}

DataSettings parse_data(const json& j) {
  check_keys(j, "data",
             {"n_samples", "seed", "csv_path", "teacher_n", "teacher_seed", "teacher_scale",
              "noise"});
  DataSettings d;
  d.n_samples = get_or<Index>(j, "n_samples", d.n_samples);
  d.seed = get_or<std::uint64_t>(j, "seed", d.seed);
  d.csv_path = get_or<std::string>(j, "csv_path", d.csv_path);
  d.teacher.n_teacher = get_or<Index>(j, "teacher_n", d.teacher.n_teacher);
  d.teacher.seed = get_or<std::uint64_t>(j, "teacher_seed", d.teacher.seed);
  d.teacher.scale = get_or<Scalar>(j, "teacher_scale", d.teacher.scale);
  d.teacher.noise = get_or<Scalar>(j, "noise", d.teacher.noise);
  return d;
}

DiagSettings parse_diag(const json& j) {
  check_keys(j, "diag",
             {"seed", "batch_size", "gradcheck_h", "gradcheck_tol", "stability_scales",
              "expansion_depths", "expansion_seeds", "expansion_theta_scale",
              "descent_candidates", "descent_half_width", "descent_candidate_scale",
              "descent_pretrain_steps", "homogeneity_lambdas", "homogeneity_tol"});
  DiagSettings d;
  d.seed = get_or<std::uint64_t>(j, "seed", d.seed);
  d.batch_size = get_or<Index>(j, "batch_size", d.batch_size);
  d.gradcheck_h = get_or<Scalar>(j, "gradcheck_h", d.gradcheck_h);
  d.gradcheck_tol = get_or<Scalar>(j, "gradcheck_tol", d.gradcheck_tol);
  d.stability_scales = get_scalars(j, "stability_scales", d.stability_scales);
  d.expansion_depths = get_indices(j, "expansion_depths", d.expansion_depths);
  d.expansion_seeds = get_or<Index>(j, "expansion_seeds", d.expansion_seeds);
  d.expansion_theta_scale = get_or<Scalar>(j, "expansion_theta_scale", d.expansion_theta_scale);
  d.descent_candidates = get_or<Index>(j, "descent_candidates", d.descent_candidates);
  d.descent_half_width = get_or<Scalar>(j, "descent_half_width", d.descent_half_width);
  d.descent_candidate_scale =
      get_or<Scalar>(j, "descent_candidate_scale", d.descent_candidate_scale);
  d.descent_pretrain_steps = get_or<Index>(j, "descent_pretrain_steps", d.descent_pretrain_steps);
  d.homogeneity_lambdas = get_scalars(j, "homogeneity_lambdas", d.homogeneity_lambdas);
  d.homogeneity_tol = get_or<Scalar>(j, "homogeneity_tol", d.homogeneity_tol);
  return d;
}

CompareSettings parse_compare(const json& j) {
  check_keys(j, "compare", {"seeds"});
  CompareSettings c;
  if (j.contains("seeds")) c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  return c;
}

}  // namespace

ModelConfig ModelSettings::to_model_config() const {
  ModelConfig cfg = make_model_config(d1, d2, act);
  cfg.r = r;
  cfg.input_radius = input_radius;
  cfg.target_bound = target_bound;
  cfg.tail_mode = tail_mode;
  if (w2_mode == W2Mode::Orthonormal) {
    Rng rng(w2_seed);
    const Index rows = std::max(d1, d2);
    const Index cols = std::min(d1, d2);
    Matrix g(rows, cols);
    rng.fill_normal(g, 1.0);
    const Matrix q =
        Eigen::HouseholderQR<Matrix>(g).householderQ() * Matrix::Identity(rows, cols);
    cfg.w2 = d2 >= d1 ? q : Matrix(q.transpose());
  }
  if (w1_mode == W1Mode::Basis) {
    cfg.w1 = Vector::Zero(d2);
    cfg.w1[0] = 1.0;
  }
  cfg.validate();
  return cfg;
}

void RunConfig::validate() const {
  train.validate();
  model.to_model_config();  // throws on bad model settings
  if (checkpoint_every < 0) throw std::invalid_argument("checkpoint_every must be >= 0");
  if (data.n_samples < 1) throw std::invalid_argument("data.n_samples must be >= 1");
  if (data.teacher.n_teacher < 0) throw std::invalid_argument("data.teacher_n must be >= 0");
  if (!(data.teacher.noise >= 0)) throw std::invalid_argument("data.noise must be >= 0");
  if (diag.batch_size < 1) throw std::invalid_argument("diag.batch_size must be >= 1");
}

RunConfig parse_run_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& ex) {
    throw std::invalid_argument(std::string("config is not valid JSON: ") + ex.what());
  }
  check_keys(j, "<root>", {"model", "train", "checkpoint_every", "data", "diag", "compare"});
  RunConfig cfg;
  if (j.contains("model")) cfg.model = parse_model(j.at("model"));
  if (j.contains("train")) cfg.train = parse_train(j.at("train"));
  cfg.checkpoint_every = get_or<Index>(j, "checkpoint_every", cfg.checkpoint_every);
  if (j.contains("data")) cfg.data = parse_data(j.at("data"));
  if (j.contains("diag")) cfg.diag = parse_diag(j.at("diag"));
  if (j.contains("compare")) cfg.compare = parse_compare(j.at("compare"));
  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

std::string serialize_run_config(const RunConfig& cfg) {
  json schedule = json::array();
  for (const LrScheduleEntry& e : cfg.train.lr_schedule)
    schedule.push_back(json::array({e.epoch, e.factor}));

  json j;
  j["model"] = {{"d1", cfg.model.d1},
                {"d2", cfg.model.d2},
                {"activation", to_string(cfg.model.act)},
                {"r", cfg.model.r},
                {"input_radius", cfg.model.input_radius},
                {"target_bound", cfg.model.target_bound},
                {"tail_mode", to_string(cfg.model.tail_mode)},
                {"w2_mode", cfg.model.w2_mode == W2Mode::Identity ? "identity" : "orthonormal"},
                {"w2_seed", cfg.model.w2_seed},
                {"w1_mode", cfg.model.w1_mode == W1Mode::Average ? "average" : "basis"}};
  j["train"] = {{"n_particles", cfg.train.n_particles},
                {"lr", cfg.train.lr},
                {"lr_schedule", schedule},
                {"momentum", cfg.train.momentum},
                {"weight_decay", cfg.train.weight_decay},
                {"epochs", cfg.train.epochs},
                {"batch_size", cfg.train.batch_size},
                {"seed", cfg.train.seed},
                {"mode", to_string(cfg.train.mode)},
                {"tau_init", to_string(cfg.train.tau_init)},
                {"theta_init_scale", cfg.train.theta_init_scale},
                {"clamp_r", cfg.train.clamp_r},
                {"tau_lr_scale", cfg.train.tau_lr_scale},
                {"eval_fraction", cfg.train.eval_fraction}};
  j["checkpoint_every"] = cfg.checkpoint_every;
  j["data"] = {{"n_samples", cfg.data.n_samples},
               {"seed", cfg.data.seed},
               {"csv_path", cfg.data.csv_path},
               {"teacher_n", cfg.data.teacher.n_teacher},
               {"teacher_seed", cfg.data.teacher.seed},
               {"teacher_scale", cfg.data.teacher.scale},
               {"noise", cfg.data.teacher.noise}};
  j["diag"] = {{"seed", cfg.diag.seed},
               {"batch_size", cfg.diag.batch_size},
               {"gradcheck_h", cfg.diag.gradcheck_h},
               {"gradcheck_tol", cfg.diag.gradcheck_tol},
               {"stability_scales", cfg.diag.stability_scales},
               {"expansion_depths", cfg.diag.expansion_depths},
               {"expansion_seeds", cfg.diag.expansion_seeds},
               {"expansion_theta_scale", cfg.diag.expansion_theta_scale},
               {"descent_candidates", cfg.diag.descent_candidates},
               {"descent_half_width", cfg.diag.descent_half_width},
               {"descent_candidate_scale", cfg.diag.descent_candidate_scale},
               {"descent_pretrain_steps", cfg.diag.descent_pretrain_steps},
               {"homogeneity_lambdas", cfg.diag.homogeneity_lambdas},
               {"homogeneity_tol", cfg.diag.homogeneity_tol}};
  j["compare"] = {{"seeds", cfg.compare.seeds}};
  return j.dump(2);
}

Dataset build_dataset(const RunConfig& cfg, const ModelConfig& model) {
  if (!cfg.data.csv_path.empty()) return load_csv(cfg.data.csv_path, model.d1);
  Rng rng(cfg.data.seed);
  return gen_teacher_student(cfg.data.teacher, model, cfg.data.n_samples, rng);
}

}  // namespace meanfield
