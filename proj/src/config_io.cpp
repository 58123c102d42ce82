#include "bohmsim/config_io.hpp"

#include <set>

namespace bohmsim {

using nlohmann::json;

namespace {

// Reads optional fields of one JSON object and rejects keys nobody asked for.
class Section {
public:
  Section(const json& parent, const std::string& key, std::string where)
      : where_(std::move(where))
  {
    if (!parent.contains(key))
      return;
    obj_ = &parent.at(key);
    if (!obj_->is_object())
      throw ConfigError(where_ + " must be an object");
  }
  Section(const json& obj, std::string where) : obj_(&obj), where_(std::move(where))
  {
    if (!obj.is_object())
      throw ConfigError(where_ + " must be an object");
  }

  bool present() const { return obj_ != nullptr; }
  bool has(const std::string& key) const { return obj_ && obj_->contains(key); }

  template <class T>
  void get(const std::string& key, T& out)
  {
    seen_.insert(key);
    if (!has(key))
      return;
    try {
      out = obj_->at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError(where_ + "." + key + " has the wrong type");
    }
  }

  void mark(const std::string& key) { seen_.insert(key); }

  const json& raw(const std::string& key)
  {
    seen_.insert(key);
    return obj_->at(key);
  }

  void finish() const
  {
    if (!obj_)
      return;
    for (const auto& [key, value] : obj_->items())
      if (!seen_.count(key))
        throw ConfigError("unknown key '" + where_ + "." + key + "'");
  }

private:
  const json* obj_ = nullptr;
  std::string where_;
  std::set<std::string> seen_;
};

std::string group_name(ApertureGroup g) { return g == ApertureGroup::A ? "A" : "B"; }

ApertureGroup group_from(const std::string& s)
{
  if (s == "A")
    return ApertureGroup::A;
  if (s == "B")
    return ApertureGroup::B;
  throw ConfigError("aperture group must be \"A\" or \"B\", got '" + s + "'");
}

} // namespace

json config_to_json(const ExperimentConfig& c)
{
  json j;
  j["species"] = {{"name", c.species.name},
                  {"mass", c.species.mass},
                  {"diameter", c.species.diameter}};
  j["constants"] = {{"h", c.consts.h}, {"hbar", c.consts.hbar}};
  j["beam"] = {{"sigma0", c.beam.sigma0}, {"v_y", c.beam.v_y}, {"v_y_spread", c.beam.v_y_spread}};
  j["geometry"] = {{"d1", c.geometry.d1}, {"d2", c.geometry.d2}};
  if (c.layout.explicit_apertures) {
    json list = json::array();
    for (const Aperture& a : *c.layout.explicit_apertures)
      list.push_back({{"center", a.center}, {"width", a.width}, {"group", group_name(a.group)}});
    j["apertures"] = list;
  } else {
    j["slits"] = {{"a_center", c.layout.a_center}, {"a_width", c.layout.a_width},
                  {"b_center", c.layout.b_center}, {"b_slits", c.layout.b_slits},
                  {"b_width", c.layout.b_width},   {"b_period", c.layout.b_period}};
  }
  j["transmission"] = to_string(c.transmission);
  j["scenario"] = to_string(c.scenario);
  const IntegratorConfig& i = c.integrator;
  j["integrator"] = {{"dt_min", i.dt_min},
                     {"dt_max", i.dt_max},
                     {"rel_tol", i.rel_tol},
                     {"abs_tol", i.abs_tol},
                     {"rho_floor", i.rho_floor},
                     {"v_cap", i.v_cap},
                     {"max_displacement", i.max_displacement},
                     {"max_relative_step", i.max_relative_step},
                     {"near_field", to_string(i.near_field)},
                     {"bridge_fresnel_ratio", i.bridge_fresnel_ratio},
                     {"bridge_max_fraction", i.bridge_max_fraction},
                     {"bridge_extent", i.bridge_extent},
                     {"record_points", i.record_points},
                     {"record_first", i.record_first}};
  const SamplingConfig& s = c.sampling;
  j["sampling"] = {{"mode", to_string(s.mode)},
                   {"trajectories", s.trajectories},
                   {"seed", s.seed},
                   {"threads", s.threads},
                   {"preslit_points", s.preslit_points},
                   {"export_trajectories", s.export_trajectories}};
  j["windows"] = {{"global_half_width", c.windows.global_half_width},
                  {"global_points", c.windows.global_points},
                  {"zoom_half_width", c.windows.zoom_half_width},
                  {"zoom_points", c.windows.zoom_points}};
  const AnalysisConfig& a = c.analysis;
  j["analysis"] = {{"histogram_bins", a.histogram_bins},
                   {"global_threshold", a.global_threshold},
                   {"global_separation", a.global_separation},
                   {"zoom_threshold", a.zoom_threshold},
                   {"zoom_separation", a.zoom_separation},
                   {"lateral_window", a.lateral_window}};
  j["smear"] = {{"rel_spread", c.smear.rel_spread}, {"nodes", c.smear.nodes}};
  return j;
}

ExperimentConfig config_from_json(const json& doc_in)
{
  if (!doc_in.is_object())
    throw ConfigError("config must be a JSON object");
  const json& doc = doc_in.contains("config") && doc_in.at("config").is_object()
                        ? doc_in.at("config")
                        : doc_in;
  ExperimentConfig c;
  Section top(doc, "config");
  for (const char* key : {"species", "constants", "beam", "geometry", "slits", "integrator",
                          "sampling", "windows", "analysis", "smear"})
    top.mark(key);

  if (top.has("species") && top.raw("species").is_string()) {
    c.species = species_preset(doc.at("species").get<std::string>());
  } else {
    Section sp(doc, "species", "species");
    if (sp.has("name")) {
      sp.get("name", c.species.name);
      // a known preset name supplies defaults for the numeric fields
      try {
        c.species = species_preset(c.species.name);
      } catch (const ConfigError&) {
      }
    }
    sp.get("mass", c.species.mass);
    sp.get("diameter", c.species.diameter);
    sp.finish();
  }

  {
    Section s(doc, "constants", "constants");
    s.get("h", c.consts.h);
    s.get("hbar", c.consts.hbar);
    s.finish();
  }
  {
    Section s(doc, "beam", "beam");
    s.get("sigma0", c.beam.sigma0);
    s.get("v_y", c.beam.v_y);
    s.get("v_y_spread", c.beam.v_y_spread);
    s.finish();
  }
  {
    Section s(doc, "geometry", "geometry");
    s.get("d1", c.geometry.d1);
    s.get("d2", c.geometry.d2);
    s.finish();
  }
  if (top.has("apertures") && top.has("slits"))
    throw ConfigError("give either 'apertures' or 'slits', not both");
  if (top.has("apertures")) {
    const json& list = top.raw("apertures");
    if (!list.is_array())
      throw ConfigError("apertures must be an array");
    std::vector<Aperture> aps;
    for (std::size_t k = 0; k < list.size(); ++k) {
      Section s(list[k], "apertures[" + std::to_string(k) + "]");
      Aperture a;
      std::string group = "A";
      s.get("center", a.center);
      s.get("width", a.width);
      s.get("group", group);
      s.finish();
      a.group = group_from(group);
      aps.push_back(a);
    }
    c.layout.explicit_apertures = std::move(aps);
  } else {
    Section s(doc, "slits", "slits");
    s.get("a_center", c.layout.a_center);
    s.get("a_width", c.layout.a_width);
    s.get("b_center", c.layout.b_center);
    s.get("b_slits", c.layout.b_slits);
    s.get("b_width", c.layout.b_width);
    s.get("b_period", c.layout.b_period);
    s.finish();
  }
  {
    std::string mode = to_string(c.transmission);
    top.get("transmission", mode);
    c.transmission = transmission_mode_from_string(mode);
    std::string kind = to_string(c.scenario);
    top.get("scenario", kind);
    c.scenario = scenario_kind_from_string(kind);
  }
  {
    Section s(doc, "integrator", "integrator");
    IntegratorConfig& i = c.integrator;
    s.get("dt_min", i.dt_min);
    s.get("dt_max", i.dt_max);
    s.get("rel_tol", i.rel_tol);
    s.get("abs_tol", i.abs_tol);
    s.get("rho_floor", i.rho_floor);
    s.get("v_cap", i.v_cap);
    s.get("max_displacement", i.max_displacement);
    s.get("max_relative_step", i.max_relative_step);
    std::string nf = to_string(i.near_field);
    s.get("near_field", nf);
    i.near_field = near_field_from_string(nf);
    s.get("bridge_fresnel_ratio", i.bridge_fresnel_ratio);
    s.get("bridge_max_fraction", i.bridge_max_fraction);
    s.get("bridge_extent", i.bridge_extent);
    s.get("record_points", i.record_points);
    s.get("record_first", i.record_first);
    s.finish();
  }
  {
    Section s(doc, "sampling", "sampling");
    SamplingConfig& m = c.sampling;
    std::string mode = to_string(m.mode);
    s.get("mode", mode);
    m.mode = sampling_mode_from_string(mode);
    s.get("trajectories", m.trajectories);
    s.get("seed", m.seed);
    s.get("threads", m.threads);
    s.get("preslit_points", m.preslit_points);
    s.get("export_trajectories", m.export_trajectories);
    s.finish();
  }
  {
    Section s(doc, "windows", "windows");
    s.get("global_half_width", c.windows.global_half_width);
    s.get("global_points", c.windows.global_points);
    s.get("zoom_half_width", c.windows.zoom_half_width);
    s.get("zoom_points", c.windows.zoom_points);
    s.finish();
  }
  {
    Section s(doc, "analysis", "analysis");
    AnalysisConfig& a = c.analysis;
    s.get("histogram_bins", a.histogram_bins);
    s.get("global_threshold", a.global_threshold);
    s.get("global_separation", a.global_separation);
    s.get("zoom_threshold", a.zoom_threshold);
    s.get("zoom_separation", a.zoom_separation);
    s.get("lateral_window", a.lateral_window);
    s.finish();
  }
  {
    Section s(doc, "smear", "smear");
    s.get("rel_spread", c.smear.rel_spread);
    s.get("nodes", c.smear.nodes);
    s.finish();
  }
  top.finish();
  c.validate();
  return c;
}

void set_config_path(json& doc, const std::string& dotted_path, const json& value)
{
  if (dotted_path.empty())
    throw ConfigError("empty parameter path");
  json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = dotted_path.find('.', start);
    const std::string key = dotted_path.substr(start, dot - start);
    if (key.empty())
      throw ConfigError("malformed parameter path '" + dotted_path + "'");
    if (!node->is_object())
      throw ConfigError("parameter path '" + dotted_path + "' crosses a non-object");
    if (dot == std::string::npos) {
      (*node)[key] = value;
      return;
    }
    node = &(*node)[key];
    if (node->is_null())
      *node = json::object();
    start = dot + 1;
  }
}

} // namespace bohmsim
