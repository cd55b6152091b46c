#pragma once

#include <memory>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "wgdiff/core.hpp"
#include "wgdiff/fields.hpp"
#include "wgdiff/geometry.hpp"
#include "wgdiff/graph.hpp"
#include "wgdiff/metric.hpp"

namespace wgdiff {

using Json = nlohmann::ordered_json;

/// Reads a JSON file; IoError when it cannot be opened, ConfigError when it
/// does not parse or the top level is not an object.
Json load_config_file(const std::string& path);

/// Typed view of one JSON object. Reading a missing key with a default
/// writes the default back, so the tree ends up fully resolved. Every key
/// read is recorded; check_consumed() rejects keys nobody asked for.
class ConfigNode {
 public:
  ConfigNode(Json& root);

  bool has(const std::string& key) const;
  std::string path() const { return path_.empty() ? "/" : path_; }

  double get_double(const std::string& key, double def);
  double require_double(const std::string& key);
  int get_int(const std::string& key, int def);
  std::uint64_t get_u64(const std::string& key, std::uint64_t def);
  bool get_bool(const std::string& key, bool def);
  std::string get_string(const std::string& key, const std::string& def);
  std::string require_string(const std::string& key);
  std::vector<double> get_doubles(const std::string& key, const std::vector<double>& def);
  std::vector<double> require_doubles(const std::string& key);
  std::vector<std::size_t> get_sizes(const std::string& key, const std::vector<std::size_t>& def);
  Point get_point(const std::string& key, const Point& def, int dim);

  /// Child object; created empty when absent and `create` is set.
  ConfigNode child(const std::string& key, bool create = true);
  /// Child object; `def` is inserted first when the key is absent.
  ConfigNode child_or(const std::string& key, Json def);
  /// Raw value of a key (marked as read), or nullptr when absent.
  const Json* raw(const std::string& key);
  /// Replaces the child object with a canonical form (used after parsing).
  void set(const std::string& key, Json value);

  /// Throws ConfigError naming the first key under this node that was never read.
  void check_consumed() const;

 private:
  ConfigNode(Json* node, std::string path, std::shared_ptr<std::set<std::string>> seen);
  const Json& at(const std::string& key) const;
  void mark(const std::string& key) const;
  [[noreturn]] void type_error(const std::string& key, const char* expected) const;

  Json* node_;
  std::string path_;
  std::shared_ptr<std::set<std::string>> seen_;
};

/// Domain object, `kind` one of: box, ball, ellipsoid-mask, two-ball-mask,
/// l-shape-mask, box-mask, mask-file.
Domain parse_domain(ConfigNode node);
/// Voxel mask from a mask-kind domain object (box-mask is a fully occupied grid).
VoxelMask parse_mask(ConfigNode node);

/// Field object: `kind` tag plus parameters (constant, sigmoid-radial,
/// cosine-radial, affine, sine, gaussian, grid-sampled).
ScalarField parse_field(ConfigNode node);
/// Inverse of parse_field; throws ConfigError for learned and custom fields.
Json field_to_json(const ScalarField& field);

SegmentQuadrature parse_quadrature(ConfigNode node, int default_steps);

}  // namespace wgdiff
