#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "aat/attack.hpp"
#include "aat/eval.hpp"
#include "aat/rir.hpp"

namespace aat {

// Flat "section.key = value" text config. Keys serialize in sorted order so
// a round trip is byte-identical.
class KeyValueConfig {
 public:
  static KeyValueConfig load(const std::string& path);
  void save(const std::string& path) const;
  std::string to_string() const;

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  void set(const std::string& key, const std::string& value);
  void set(const std::string& key, double value);
  void set(const std::string& key, std::int64_t value);
  void set(const std::string& key, std::uint64_t value);
  void set(const std::string& key, bool value);

  std::string get_string(const std::string& key, const std::string& dflt) const;
  double get_double(const std::string& key, double dflt) const;
  std::int64_t get_int(const std::string& key, std::int64_t dflt) const;
  std::uint64_t get_uint(const std::string& key, std::uint64_t dflt) const;
  bool get_bool(const std::string& key, bool dflt) const;

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

// Everything one run needs; persisting it re-runs to identical outputs.
struct RunConfig {
  AttackConfig attack;
  RoomRanges rooms;
  EvalConfig eval;
  std::string model_path;
  std::string output_dir = ".";
  std::string input_path;    // WAV to attack / evaluate
  std::string target_text;
  std::uint64_t master_seed = 1;

  // Merge keys from kv over the current values; unknown keys are an error.
  void apply(const KeyValueConfig& kv);
  KeyValueConfig to_kv() const;
};

}  // namespace aat
