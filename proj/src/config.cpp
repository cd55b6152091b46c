#include "wgdiff/config.hpp"

#include <fstream>

namespace wgdiff {

Json load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file '" + path + "'");
  Json j;
  try {
    j = Json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const Json::parse_error& e) {
    throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
  }
  if (!j.is_object()) throw ConfigError("config '" + path + "': top level must be an object");
  return j;
}

// ---------------------------------------------------------------------------
// ConfigNode

ConfigNode::ConfigNode(Json& root) : ConfigNode(&root, "", std::make_shared<std::set<std::string>>()) {
  if (!root.is_object()) throw ConfigError("config: expected an object at /");
}

ConfigNode::ConfigNode(Json* node, std::string path, std::shared_ptr<std::set<std::string>> seen)
    : node_(node), path_(std::move(path)), seen_(std::move(seen)) {}

bool ConfigNode::has(const std::string& key) const { return node_->contains(key); }

const Json& ConfigNode::at(const std::string& key) const { return (*node_)[key]; }

void ConfigNode::mark(const std::string& key) const { seen_->insert(path_ + "/" + key); }

void ConfigNode::type_error(const std::string& key, const char* expected) const {
  throw ConfigError("config " + path_ + "/" + key + ": expected " + expected);
}

double ConfigNode::get_double(const std::string& key, double def) {
  mark(key);
  if (!has(key)) {
    (*node_)[key] = def;
    return def;
  }
  if (!at(key).is_number()) type_error(key, "a number");
  return at(key).get<double>();
}

double ConfigNode::require_double(const std::string& key) {
  if (!has(key)) throw ConfigError("config " + path() + ": missing required key '" + key + "'");
  return get_double(key, 0.0);
}

int ConfigNode::get_int(const std::string& key, int def) {
  mark(key);
  if (!has(key)) {
    (*node_)[key] = def;
    return def;
  }
  if (!at(key).is_number_integer()) type_error(key, "an integer");
  return at(key).get<int>();
}

std::uint64_t ConfigNode::get_u64(const std::string& key, std::uint64_t def) {
  mark(key);
  if (!has(key)) {
    (*node_)[key] = def;
    return def;
  }
  const Json& v = at(key);
  if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<std::int64_t>() < 0))
    type_error(key, "a nonnegative integer");
  return at(key).get<std::uint64_t>();
}

bool ConfigNode::get_bool(const std::string& key, bool def) {
  mark(key);
  if (!has(key)) {
    (*node_)[key] = def;
    return def;
  }
  if (!at(key).is_boolean()) type_error(key, "true or false");
  return at(key).get<bool>();
}

std::string ConfigNode::get_string(const std::string& key, const std::string& def) {
  mark(key);
  if (!has(key)) {
    (*node_)[key] = def;
    return def;
  }
  if (!at(key).is_string()) type_error(key, "a string");
  return at(key).get<std::string>();
}

std::string ConfigNode::require_string(const std::string& key) {
  if (!has(key)) throw ConfigError("config " + path() + ": missing required key '" + key + "'");
  return get_string(key, "");
}

std::vector<double> ConfigNode::get_doubles(const std::string& key, const std::vector<double>& def) {
  mark(key);
  if (!has(key)) {
    (*node_)[key] = def;
    return def;
  }
  if (!at(key).is_array()) type_error(key, "an array of numbers");
  std::vector<double> out;
  for (const auto& v : at(key)) {
    if (!v.is_number()) type_error(key, "an array of numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

std::vector<double> ConfigNode::require_doubles(const std::string& key) {
  if (!has(key)) throw ConfigError("config " + path() + ": missing required key '" + key + "'");
  return get_doubles(key, {});
}

std::vector<std::size_t> ConfigNode::get_sizes(const std::string& key, const std::vector<std::size_t>& def) {
  mark(key);
  if (!has(key)) {
    (*node_)[key] = def;
    return def;
  }
  if (!at(key).is_array()) type_error(key, "an array of nonnegative integers");
  std::vector<std::size_t> out;
  for (const auto& v : at(key)) {
    if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<std::int64_t>() < 0))
      type_error(key, "an array of nonnegative integers");
    out.push_back(v.get<std::size_t>());
  }
  return out;
}

Point ConfigNode::get_point(const std::string& key, const Point& def, int dim) {
  std::vector<double> d(def.begin(), def.begin() + dim);
  const auto v = get_doubles(key, d);
  if (static_cast<int>(v.size()) != dim)
    throw ConfigError("config " + path_ + "/" + key + ": expected " + std::to_string(dim) + " components");
  Point p{0.0, 0.0, 0.0};
  for (int a = 0; a < dim; ++a) p[a] = v[a];
  return p;
}

ConfigNode ConfigNode::child(const std::string& key, bool create) {
  mark(key);
  if (!has(key)) {
    if (!create) throw ConfigError("config " + path() + ": missing required key '" + key + "'");
    (*node_)[key] = Json::object();
  }
  if (!at(key).is_object()) type_error(key, "an object");
  return ConfigNode(&(*node_)[key], path_ + "/" + key, seen_);
}

ConfigNode ConfigNode::child_or(const std::string& key, Json def) {
  if (!has(key)) (*node_)[key] = std::move(def);
  return child(key, false);
}

const Json* ConfigNode::raw(const std::string& key) {
  mark(key);
  return has(key) ? &at(key) : nullptr;
}

void ConfigNode::set(const std::string& key, Json value) {
  mark(key);
  (*node_)[key] = std::move(value);
  // Everything below a canonicalized subtree counts as read.
  std::vector<std::pair<const Json*, std::string>> stack{{&(*node_)[key], path_ + "/" + key}};
  while (!stack.empty()) {
    auto [j, p] = stack.back();
    stack.pop_back();
    if (!j->is_object()) continue;
    for (auto it = j->begin(); it != j->end(); ++it) {
      seen_->insert(p + "/" + it.key());
      stack.emplace_back(&it.value(), p + "/" + it.key());
    }
  }
}

void ConfigNode::check_consumed() const {
  std::vector<std::pair<const Json*, std::string>> stack{{node_, path_}};
  while (!stack.empty()) {
    auto [j, p] = stack.back();
    stack.pop_back();
    if (!j->is_object()) continue;
    for (auto it = j->begin(); it != j->end(); ++it) {
      const std::string key_path = p + "/" + it.key();
      if (!seen_->count(key_path)) throw ConfigError("config: unknown key " + key_path);
      stack.emplace_back(&it.value(), key_path);
    }
  }
}

// ---------------------------------------------------------------------------
// Domains

namespace {

int read_dim(ConfigNode& node, int def) {
  const int dim = node.get_int("dim", def);
  if (dim < 1 || dim > kMaxDim) throw ConfigError("config " + node.path() + "/dim: must be 1, 2 or 3");
  return dim;
}

std::array<int, 3> read_shape(ConfigNode& node, int dim) {
  const auto v = node.get_sizes("shape", std::vector<std::size_t>(static_cast<std::size_t>(dim), 32));
  if (static_cast<int>(v.size()) != dim) throw ConfigError("config " + node.path() + "/shape: one entry per axis");
  std::array<int, 3> shape{1, 1, 1};
  for (int a = 0; a < dim; ++a) {
    if (v[a] == 0) throw ConfigError("config " + node.path() + "/shape: entries must be > 0");
    shape[a] = static_cast<int>(v[a]);
  }
  return shape;
}

}  // namespace

VoxelMask parse_mask(ConfigNode node) {
  const std::string kind = node.require_string("kind");
  if (kind == "ellipsoid-mask") {
    const int dim = read_dim(node, 3);
    const auto shape = read_shape(node, dim);
    const Point spacing = node.get_point("spacing", {0.1, 0.1, 0.1}, dim);
    const Point axes = node.get_point("semi_axes", {1.0, 1.0, 1.0}, dim);
    Point sp{1.0, 1.0, 1.0}, ax{1.0, 1.0, 1.0};
    for (int a = 0; a < dim; ++a) {
      sp[a] = spacing[a];
      ax[a] = axes[a];
    }
    return make_ellipsoid_mask(dim, shape, sp, ax);
  }
  if (kind == "two-ball-mask") {
    const int dim = read_dim(node, 2);
    return make_two_ball_mask(dim, node.get_int("cells_per_unit", 20), node.get_double("radius", 0.5),
                              node.get_double("separation", 0.8));
  }
  if (kind == "l-shape-mask") return make_l_shape_mask(node.get_int("cells_per_side", 40));
  if (kind == "box-mask") {
    const int dim = read_dim(node, 2);
    const auto shape = read_shape(node, dim);
    const Point lo = node.get_point("lower", {0.0, 0.0, 0.0}, dim);
    const Point hi = node.get_point("upper", {1.0, 1.0, 1.0}, dim);
    Point spacing{1.0, 1.0, 1.0};
    for (int a = 0; a < dim; ++a) {
      if (!(hi[a] > lo[a])) throw ConfigError("config " + node.path() + ": upper must exceed lower");
      spacing[a] = (hi[a] - lo[a]) / shape[a];
    }
    const std::size_t total = static_cast<std::size_t>(shape[0]) * shape[1] * shape[2];
    return VoxelMask(dim, shape, spacing, lo, std::vector<std::uint8_t>(total, 1));
  }
  if (kind == "mask-file") return read_voxel_mask_file(node.require_string("path"));
  throw ConfigError("config " + node.path() + "/kind: unknown mask kind '" + kind + "'");
}

Domain parse_domain(ConfigNode node) {
  const std::string kind = node.require_string("kind");
  if (kind == "box") {
    const int dim = read_dim(node, 2);
    return Domain::box(dim, node.get_point("lower", {0.0, 0.0, 0.0}, dim),
                       node.get_point("upper", {1.0, 1.0, 1.0}, dim));
  }
  if (kind == "ball") {
    const int dim = read_dim(node, 2);
    return Domain::ball(dim, node.get_point("center", {0.0, 0.0, 0.0}, dim), node.get_double("radius", 1.0));
  }
  return Domain::voxel_mask(parse_mask(node));
}

// ---------------------------------------------------------------------------
// Fields

ScalarField parse_field(ConfigNode node) {
  const std::string kind = node.require_string("kind");
  if (kind == "constant") return ScalarField::constant(node.get_double("value", 1.0));
  if (kind == "sigmoid-radial") {
    SigmoidRadialParams p;
    p.a = node.get_double("a", p.a);
    p.b = node.get_double("b", p.b);
    p.c = node.get_double("c", p.c);
    return ScalarField::sigmoid_radial(p);
  }
  if (kind == "cosine-radial") {
    CosineRadialParams p;
    p.amplitude = node.get_double("amplitude", p.amplitude);
    p.a = node.get_double("a", p.a);
    p.b = node.get_double("b", p.b);
    p.c = node.get_double("c", p.c);
    return ScalarField::cosine_radial(p);
  }
  if (kind == "affine") {
    AffineParams p;
    const auto c = node.get_doubles("coeffs", {1.0, 0.0, 0.0});
    if (c.empty() || c.size() > 3) throw ConfigError("config " + node.path() + "/coeffs: 1 to 3 entries");
    p.coeffs = {0.0, 0.0, 0.0};
    for (std::size_t a = 0; a < c.size(); ++a) p.coeffs[a] = c[a];
    p.offset = node.get_double("offset", 0.0);
    return ScalarField::affine(p);
  }
  if (kind == "sine") {
    SineParams p;
    p.axis = node.get_int("axis", p.axis);
    p.amplitude = node.get_double("amplitude", p.amplitude);
    p.frequency = node.get_double("frequency", p.frequency);
    p.phase = node.get_double("phase", p.phase);
    return ScalarField::sine(p);
  }
  if (kind == "gaussian") {
    GaussianParams p;
    const auto c = node.get_doubles("center", {0.0, 0.0, 0.0});
    if (c.empty() || c.size() > 3) throw ConfigError("config " + node.path() + "/center: 1 to 3 entries");
    for (std::size_t a = 0; a < c.size(); ++a) p.center[a] = c[a];
    p.amplitude = node.get_double("amplitude", p.amplitude);
    p.width = node.get_double("width", p.width);
    p.offset = node.get_double("offset", p.offset);
    return ScalarField::gaussian(p);
  }
  if (kind == "grid-sampled") {
    GridSamples s;
    s.dim = read_dim(node, 1);
    s.shape = read_shape(node, s.dim);
    s.origin = node.get_point("origin", {0.0, 0.0, 0.0}, s.dim);
    const Point sp = node.get_point("spacing", {1.0, 1.0, 1.0}, s.dim);
    for (int a = 0; a < s.dim; ++a) s.spacing[a] = sp[a];
    s.values = node.require_doubles("values");
    return ScalarField::grid_sampled(std::move(s));
  }
  throw ConfigError("config " + node.path() + "/kind: unknown field kind '" + kind + "'");
}

Json field_to_json(const ScalarField& field) {
  Json j;
  j["kind"] = to_string(field.kind());
  switch (field.kind()) {
    case FieldKind::Constant: j["value"] = std::get<double>(field.params()); break;
    case FieldKind::SigmoidRadial: {
      const auto& p = std::get<SigmoidRadialParams>(field.params());
      j["a"] = p.a;
      j["b"] = p.b;
      j["c"] = p.c;
      break;
    }
    case FieldKind::CosineRadial: {
      const auto& p = std::get<CosineRadialParams>(field.params());
      j["amplitude"] = p.amplitude;
      j["a"] = p.a;
      j["b"] = p.b;
      j["c"] = p.c;
      break;
    }
    case FieldKind::Affine: {
      const auto& p = std::get<AffineParams>(field.params());
      j["coeffs"] = std::vector<double>(p.coeffs.begin(), p.coeffs.end());
      j["offset"] = p.offset;
      break;
    }
    case FieldKind::Sine: {
      const auto& p = std::get<SineParams>(field.params());
      j["axis"] = p.axis;
      j["amplitude"] = p.amplitude;
      j["frequency"] = p.frequency;
      j["phase"] = p.phase;
      break;
    }
    case FieldKind::Gaussian: {
      const auto& p = std::get<GaussianParams>(field.params());
      j["center"] = std::vector<double>(p.center.begin(), p.center.end());
      j["amplitude"] = p.amplitude;
      j["width"] = p.width;
      j["offset"] = p.offset;
      break;
    }
    case FieldKind::GridSampled: {
      const auto* g = field.grid();
      j["dim"] = g->dim;
      j["shape"] = std::vector<int>(g->shape.begin(), g->shape.begin() + g->dim);
      j["origin"] = std::vector<double>(g->origin.begin(), g->origin.begin() + g->dim);
      j["spacing"] = std::vector<double>(g->spacing.begin(), g->spacing.begin() + g->dim);
      j["values"] = g->values;
      break;
    }
    case FieldKind::Learned:
    case FieldKind::Custom: throw ConfigError("field_to_json: " + to_string(field.kind()) + " fields have no config form");
  }
  return j;
}

SegmentQuadrature parse_quadrature(ConfigNode node, int default_steps) {
  SegmentQuadrature q;
  q.steps = node.get_int("steps", default_steps);
  if (q.steps < 1) throw ConfigError("config " + node.path() + "/steps: must be >= 1");
  q.rule = parse_quadrature_rule(node.get_string("rule", to_string(QuadratureRule::Trapezoid)));
  return q;
}

}  // namespace wgdiff
