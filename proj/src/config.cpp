#include "aat/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace aat {
namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

KeyValueConfig KeyValueConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config: " + path);
  KeyValueConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": expected 'key = value'");
    const std::string key = trim(stripped.substr(0, eq));
    if (key.empty())
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": empty key");
    cfg.values_[key] = trim(stripped.substr(eq + 1));
  }
  return cfg;
}

std::string KeyValueConfig::to_string() const {
  std::ostringstream out;
  for (const auto& [k, v] : values_) out << k << " = " << v << "\n";
  return out.str();
}

void KeyValueConfig::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write config: " + path);
  out << to_string();
}

void KeyValueConfig::set(const std::string& key, const std::string& value) {
  values_[key] = value;
}
void KeyValueConfig::set(const std::string& key, double value) {
  values_[key] = fmt_double(value);
}
void KeyValueConfig::set(const std::string& key, std::int64_t value) {
  values_[key] = std::to_string(value);
}
void KeyValueConfig::set(const std::string& key, std::uint64_t value) {
  values_[key] = std::to_string(value);
}
void KeyValueConfig::set(const std::string& key, bool value) {
  values_[key] = value ? "true" : "false";
}

std::string KeyValueConfig::get_string(const std::string& key,
                                       const std::string& dflt) const {
  const auto it = values_.find(key);
  return it == values_.end() ? dflt : it->second;
}

double KeyValueConfig::get_double(const std::string& key, double dflt) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return dflt;
  std::size_t pos = 0;
  const double v = std::stod(it->second, &pos);
  if (pos != it->second.size())
    throw std::runtime_error("config key " + key + ": bad number '" +
                             it->second + "'");
  return v;
}

std::int64_t KeyValueConfig::get_int(const std::string& key,
                                     std::int64_t dflt) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return dflt;
  std::size_t pos = 0;
  const std::int64_t v = std::stoll(it->second, &pos);
  if (pos != it->second.size())
    throw std::runtime_error("config key " + key + ": bad integer '" +
                             it->second + "'");
  return v;
}

std::uint64_t KeyValueConfig::get_uint(const std::string& key,
                                       std::uint64_t dflt) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return dflt;
  std::size_t pos = 0;
  const std::uint64_t v = std::stoull(it->second, &pos);
  if (pos != it->second.size())
    throw std::runtime_error("config key " + key + ": bad integer '" +
                             it->second + "'");
  return v;
}

bool KeyValueConfig::get_bool(const std::string& key, bool dflt) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return dflt;
  if (it->second == "true" || it->second == "1") return true;
  if (it->second == "false" || it->second == "0") return false;
  throw std::runtime_error("config key " + key + ": bad boolean '" +
                           it->second + "'");
}

namespace {

const char* kAxes[3] = {"x", "y", "z"};

void apply_rooms(const KeyValueConfig& kv, RoomRanges& r) {
  for (int a = 0; a < 3; ++a) {
    const std::string ax = kAxes[a];
    r.dims_lo[a] = kv.get_double("room.dims_lo_" + ax, r.dims_lo[a]);
    r.dims_hi[a] = kv.get_double("room.dims_hi_" + ax, r.dims_hi[a]);
    r.src_frac_lo[a] = kv.get_double("room.src_frac_lo_" + ax, r.src_frac_lo[a]);
    r.src_frac_hi[a] = kv.get_double("room.src_frac_hi_" + ax, r.src_frac_hi[a]);
    r.lis_frac_lo[a] = kv.get_double("room.lis_frac_lo_" + ax, r.lis_frac_lo[a]);
    r.lis_frac_hi[a] = kv.get_double("room.lis_frac_hi_" + ax, r.lis_frac_hi[a]);
  }
  r.rt60_lo = kv.get_double("room.rt60_lo", r.rt60_lo);
  r.rt60_hi = kv.get_double("room.rt60_hi", r.rt60_hi);
  r.wall_clearance = kv.get_double("room.wall_clearance", r.wall_clearance);
  r.min_separation = kv.get_double("room.min_separation", r.min_separation);
}

void store_rooms(KeyValueConfig& kv, const RoomRanges& r) {
  for (int a = 0; a < 3; ++a) {
    const std::string ax = kAxes[a];
    kv.set("room.dims_lo_" + ax, r.dims_lo[a]);
    kv.set("room.dims_hi_" + ax, r.dims_hi[a]);
    kv.set("room.src_frac_lo_" + ax, r.src_frac_lo[a]);
    kv.set("room.src_frac_hi_" + ax, r.src_frac_hi[a]);
    kv.set("room.lis_frac_lo_" + ax, r.lis_frac_lo[a]);
    kv.set("room.lis_frac_hi_" + ax, r.lis_frac_hi[a]);
  }
  kv.set("room.rt60_lo", r.rt60_lo);
  kv.set("room.rt60_hi", r.rt60_hi);
  kv.set("room.wall_clearance", r.wall_clearance);
  kv.set("room.min_separation", r.min_separation);
}

}  // namespace

void RunConfig::apply(const KeyValueConfig& kv) {
  static const char* kKnown[] = {
      "attack.variant", "attack.epsilon", "attack.snr_floor_db",
      "attack.learning_rate", "attack.min_iterations", "attack.alpha_init",
      "attack.alpha_factor", "attack.inc_streak", "attack.dec_streak",
      "attack.eot_copies", "attack.noise_sigma", "attack.max_offset",
      "attack.ref_length", "attack.success_min_copies", "attack.seed",
      "eval.n_transforms", "eval.noise_sigma", "eval.max_offset", "eval.seed",
      "run.model_path", "run.output_dir", "run.input_path", "run.target_text",
      "run.master_seed"};
  for (const auto& [k, v] : kv.values()) {
    bool known = k.rfind("room.", 0) == 0;
    for (const char* name : kKnown) known = known || k == name;
    if (!known) throw std::runtime_error("unknown config key: " + k);
  }

  attack.variant =
      variant_from_name(kv.get_string("attack.variant", variant_name(attack.variant)));
  attack.epsilon = kv.get_double("attack.epsilon", attack.epsilon);
  attack.snr_floor_db = kv.get_double("attack.snr_floor_db", attack.snr_floor_db);
  attack.learning_rate = kv.get_double("attack.learning_rate", attack.learning_rate);
  attack.min_iterations =
      static_cast<int>(kv.get_int("attack.min_iterations", attack.min_iterations));
  attack.alpha_init = kv.get_double("attack.alpha_init", attack.alpha_init);
  attack.alpha_factor = kv.get_double("attack.alpha_factor", attack.alpha_factor);
  attack.inc_streak = static_cast<int>(kv.get_int("attack.inc_streak", attack.inc_streak));
  attack.dec_streak = static_cast<int>(kv.get_int("attack.dec_streak", attack.dec_streak));
  attack.eot_copies = static_cast<int>(kv.get_int("attack.eot_copies", attack.eot_copies));
  attack.noise_sigma = kv.get_double("attack.noise_sigma", attack.noise_sigma);
  attack.max_offset = static_cast<int>(kv.get_int("attack.max_offset", attack.max_offset));
  attack.ref_length = static_cast<int>(kv.get_int("attack.ref_length", attack.ref_length));
  attack.success_min_copies = static_cast<int>(
      kv.get_int("attack.success_min_copies", attack.success_min_copies));
  attack.seed = kv.get_uint("attack.seed", attack.seed);

  apply_rooms(kv, rooms);

  eval.n_transforms =
      static_cast<int>(kv.get_int("eval.n_transforms", eval.n_transforms));
  eval.noise_sigma = kv.get_double("eval.noise_sigma", eval.noise_sigma);
  eval.max_offset = static_cast<int>(kv.get_int("eval.max_offset", eval.max_offset));
  eval.seed = kv.get_uint("eval.seed", eval.seed);
  eval.ranges = rooms;

  model_path = kv.get_string("run.model_path", model_path);
  output_dir = kv.get_string("run.output_dir", output_dir);
  input_path = kv.get_string("run.input_path", input_path);
  target_text = kv.get_string("run.target_text", target_text);
  master_seed = kv.get_uint("run.master_seed", master_seed);
}

KeyValueConfig RunConfig::to_kv() const {
  KeyValueConfig kv;
  kv.set("attack.variant", variant_name(attack.variant));
  kv.set("attack.epsilon", attack.epsilon);
  kv.set("attack.snr_floor_db", attack.snr_floor_db);
  kv.set("attack.learning_rate", attack.learning_rate);
  kv.set("attack.min_iterations", static_cast<std::int64_t>(attack.min_iterations));
  kv.set("attack.alpha_init", attack.alpha_init);
  kv.set("attack.alpha_factor", attack.alpha_factor);
  kv.set("attack.inc_streak", static_cast<std::int64_t>(attack.inc_streak));
  kv.set("attack.dec_streak", static_cast<std::int64_t>(attack.dec_streak));
  kv.set("attack.eot_copies", static_cast<std::int64_t>(attack.eot_copies));
  kv.set("attack.noise_sigma", attack.noise_sigma);
  kv.set("attack.max_offset", static_cast<std::int64_t>(attack.max_offset));
  kv.set("attack.ref_length", static_cast<std::int64_t>(attack.ref_length));
  kv.set("attack.success_min_copies",
         static_cast<std::int64_t>(attack.success_min_copies));
  kv.set("attack.seed", attack.seed);
  store_rooms(kv, rooms);
  kv.set("eval.n_transforms", static_cast<std::int64_t>(eval.n_transforms));
  kv.set("eval.noise_sigma", eval.noise_sigma);
  kv.set("eval.max_offset", static_cast<std::int64_t>(eval.max_offset));
  kv.set("eval.seed", eval.seed);
  kv.set("run.model_path", model_path);
  kv.set("run.output_dir", output_dir);
  kv.set("run.input_path", input_path);
  kv.set("run.target_text", target_text);
  kv.set("run.master_seed", master_seed);
  return kv;
}

}  // namespace aat
