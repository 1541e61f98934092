#include "aistk/vrnn/checkpoint.hpp"

#include <fstream>
#include <map>
#include <sstream>

#include "aistk/binio.hpp"
#include "aistk/errors.hpp"

namespace aistk::vrnn {

namespace {

constexpr const char* kMagic = "AISTK-VRNN-CHECKPOINT 1";

std::vector<std::string> split_ws(const std::string& line) {
  std::istringstream ss(line);
  std::vector<std::string> toks;
  std::string t;
  while (ss >> t) toks.push_back(t);
  return toks;
}

}  // namespace

void save_checkpoint(const VrnnModel& m, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open checkpoint for writing: " + path.string());
  const auto& roi = m.cfg.roi;
  os << kMagic << "\n";
  os << "lat_min " << fmt_g17(roi.lat_min) << "\n";
  os << "lat_max " << fmt_g17(roi.lat_max) << "\n";
  os << "lon_min " << fmt_g17(roi.lon_min) << "\n";
  os << "lon_max " << fmt_g17(roi.lon_max) << "\n";
  os << "lat_bins " << roi.lat_bins << "\n";
  os << "lon_bins " << roi.lon_bins << "\n";
  os << "sog_bins " << roi.sog_bins << "\n";
  os << "cog_bins " << roi.cog_bins << "\n";
  os << "sog_max " << fmt_g17(roi.sog_max) << "\n";
  os << "dt " << roi.dt << "\n";
  os << "hidden_dim " << m.cfg.hidden_dim << "\n";
  os << "latent_dim " << m.cfg.latent_dim << "\n";
  os << "sigma_floor " << fmt_g17(m.cfg.sigma_floor) << "\n";
  auto named = m.params();
  os << "param_tensors " << named.size() << "\n";
  for (auto& [name, t] : named) {
    os << "tensor " << name << " " << t->ndim();
    for (int d : t->shape) os << " " << d;
    os << "\n";
  }
  os << "data\n";
  for (auto& [name, t] : named)
    for (double v : t->data) write_f32_le(os, float(v));
  if (!os) throw IoError("failed writing checkpoint: " + path.string());
}

VrnnModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint: " + path.string());
  std::string line;
  if (!std::getline(is, line) || line != kMagic)
    throw FormatError("not a model checkpoint: bad magic in " + path.string());

  std::map<std::string, std::string> fields;
  std::vector<std::pair<std::string, std::vector<int>>> manifest;
  while (std::getline(is, line)) {
    if (line == "data") break;
    auto toks = split_ws(line);
    if (toks.empty()) throw FormatError("empty checkpoint header line");
    if (toks[0] == "tensor") {
      if (toks.size() < 3) throw FormatError("malformed tensor line: " + line);
      const int ndim = int(parse_int(toks[2], "tensor ndim"));
      if (int(toks.size()) != 3 + ndim)
        throw FormatError("malformed tensor line: " + line);
      std::vector<int> shape;
      for (int i = 0; i < ndim; ++i)
        shape.push_back(int(parse_int(toks[size_t(3 + i)], "tensor dim")));
      manifest.emplace_back(toks[1], shape);
    } else {
      if (toks.size() != 2)
        throw FormatError("malformed checkpoint header line: " + line);
      if (!fields.emplace(toks[0], toks[1]).second)
        throw FormatError("duplicate checkpoint field: " + toks[0]);
    }
  }
  if (line != "data") throw FormatError("checkpoint has no data section");

  auto need = [&](const char* key) -> const std::string& {
    auto it = fields.find(key);
    if (it == fields.end())
      throw FormatError(std::string("checkpoint missing field: ") + key);
    return it->second;
  };
  static const char* known[] = {"lat_min", "lat_max", "lon_min", "lon_max",
                                "lat_bins", "lon_bins", "sog_bins", "cog_bins",
                                "sog_max", "dt", "hidden_dim", "latent_dim",
                                "sigma_floor", "param_tensors"};
  for (auto& [k, v] : fields) {
    bool ok = false;
    for (const char* kk : known) ok = ok || (k == kk);
    if (!ok) throw FormatError("unknown checkpoint field: " + k);
  }

  VrnnConfig cfg;
  cfg.roi.lat_min = parse_double(need("lat_min"), "lat_min");
  cfg.roi.lat_max = parse_double(need("lat_max"), "lat_max");
  cfg.roi.lon_min = parse_double(need("lon_min"), "lon_min");
  cfg.roi.lon_max = parse_double(need("lon_max"), "lon_max");
  cfg.roi.lat_bins = int(parse_int(need("lat_bins"), "lat_bins"));
  cfg.roi.lon_bins = int(parse_int(need("lon_bins"), "lon_bins"));
  cfg.roi.sog_bins = int(parse_int(need("sog_bins"), "sog_bins"));
  cfg.roi.cog_bins = int(parse_int(need("cog_bins"), "cog_bins"));
  cfg.roi.sog_max = parse_double(need("sog_max"), "sog_max");
  cfg.roi.dt = int(parse_int(need("dt"), "dt"));
  cfg.hidden_dim = int(parse_int(need("hidden_dim"), "hidden_dim"));
  cfg.latent_dim = int(parse_int(need("latent_dim"), "latent_dim"));
  cfg.sigma_floor = parse_double(need("sigma_floor"), "sigma_floor");
  cfg.roi.finalize();

  Rng rng(0);
  VrnnModel m = VrnnModel::create(cfg, rng);
  auto named = m.params();
  if (parse_int(need("param_tensors"), "param_tensors") !=
      std::int64_t(named.size()))
    throw FormatError("checkpoint tensor count does not match the architecture");
  if (manifest.size() != named.size())
    throw FormatError("checkpoint tensor manifest is incomplete");
  for (size_t i = 0; i < named.size(); ++i) {
    if (manifest[i].first != named[i].first)
      throw FormatError("checkpoint tensor order mismatch: expected " +
                        named[i].first + ", found " + manifest[i].first);
    if (manifest[i].second != named[i].second->shape)
      throw FormatError("checkpoint shape mismatch for " + named[i].first);
  }
  try {
    for (auto& [name, t] : named)
      for (double& v : t->data) v = double(read_f32_le(is));
  } catch (const IoError&) {
    throw FormatError("checkpoint truncated: " + path.string());
  }
  char probe;
  if (is.read(&probe, 1) && is.gcount() == 1)
    throw FormatError("trailing bytes after checkpoint payload");
  return m;
}

void check_roi_compatible(const VrnnModel& m, const RoiConfig& roi) {
  const auto& r = m.cfg.roi;
  auto fail = [](const std::string& field) {
    throw FormatError("checkpoint was trained on a different grid: field '" +
                      field + "' disagrees with the run configuration");
  };
  if (r.lat_min != roi.lat_min) fail("lat_min");
  if (r.lat_max != roi.lat_max) fail("lat_max");
  if (r.lon_min != roi.lon_min) fail("lon_min");
  if (r.lon_max != roi.lon_max) fail("lon_max");
  if (r.lat_bins != roi.lat_bins) fail("lat_bins");
  if (r.lon_bins != roi.lon_bins) fail("lon_bins");
  if (r.sog_bins != roi.sog_bins) fail("sog_bins");
  if (r.cog_bins != roi.cog_bins) fail("cog_bins");
  if (r.sog_max != roi.sog_max) fail("sog_max");
  if (r.dt != roi.dt) fail("dt");
}

}  // namespace aistk::vrnn
