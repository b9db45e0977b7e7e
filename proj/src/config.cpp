#include "ngdisp/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <numbers>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "ngdisp/filters.hpp"

namespace ngdisp {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(s);
  while (std::getline(is, item, sep)) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double parse_factor(const std::string& tok) {
  if (tok == "pi") return std::numbers::pi;
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(tok, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != tok.size() || tok.empty()) throw ConfigError("not a number: '" + tok + "'");
  return v;
}

std::vector<double> parse_reals(const std::string& s) {
  std::vector<double> out;
  for (const auto& item : split(s, ',')) out.push_back(parse_real(item));
  return out;
}

int parse_int(const std::string& s) {
  const double v = parse_real(s);
  if (v != std::floor(v) || std::abs(v) > 1e9) throw ConfigError("not an integer: '" + s + "'");
  return static_cast<int>(v);
}

std::vector<int> parse_extents(const std::string& s) {
  std::vector<int> out;
  for (const auto& item : split(s, 'x')) out.push_back(parse_int(item));
  if (out.empty()) throw ConfigError("empty lattice extents");
  return out;
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

std::string join(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + fmt(v[i]);
  return s;
}

}  // namespace

double parse_real(const std::string& text) {
  const std::string s = trim(text);
  if (s.empty()) throw ConfigError("empty number");
  double sign = 1.0;
  std::string body = s;
  if (body[0] == '-' && body.find("pi") != std::string::npos) {
    sign = -1.0;
    body = body.substr(1);
  }
  // a*b/c chains, left to right
  double value = 1.0;
  char op = '*';
  std::string tok;
  auto apply = [&] {
    const double f = parse_factor(trim(tok));
    value = op == '*' ? value * f : value / f;
    tok.clear();
  };
  for (std::size_t i = 0; i < body.size(); ++i) {
    const char c = body[i];
    const bool exponent_sign = (c == '-' || c == '+') && i > 0 && (body[i - 1] == 'e' || body[i - 1] == 'E');
    if ((c == '*' || c == '/') && !exponent_sign) {
      apply();
      op = c;
    } else {
      tok += c;
    }
  }
  apply();
  if (!std::isfinite(value)) throw ConfigError("non-finite number: '" + s + "'");
  return sign * value;
}

void ScanConfig::validate() const {
  if (lattices.empty()) throw ConfigError("[lattice] extents: at least one lattice required");
  for (const auto& ext : lattices) {
    LatticeSpec spec{ext, spin};
    try {
      spec.validate();
    } catch (const std::exception& e) {
      throw ConfigError(std::string("[lattice] extents: ") + e.what());
    }
  }
  if (B.empty()) throw ConfigError("[field] B: ladder is empty");
  for (std::size_t i = 0; i < B.size(); ++i) {
    if (!(B[i] > 0.0)) throw ConfigError("[field] B: entries must be strictly positive");
    if (i > 0 && !(B[i] < B[i - 1])) throw ConfigError("[field] B: ladder must be strictly descending");
  }
  if (p.empty()) throw ConfigError("[wavepacket] p: at least one |p| required");
  for (double v : p)
    if (!(v > 0.0 && v < kappa)) throw ConfigError("[wavepacket] p: every |p| must satisfy 0 < |p| < kappa");
  if (!(gamma > delta_gamma && delta_gamma > 0.0)) throw ConfigError("[filter] need gamma > delta_gamma > 0");
  if (epsilon) {
    try {
      FilterSpec{*epsilon, gamma, delta_gamma}.validate();
    } catch (const std::exception& e) {
      throw ConfigError(std::string("[filter] ") + e.what());
    }
  }
  if (vmin_ladder.empty()) throw ConfigError("[epsilon] vmin_ladder: empty");
  try {
    FilterSpec{locality_epsilon, locality_gamma, locality_delta_gamma}.validate();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("[locality] ") + e.what());
  }
  if (!(bounds_gamma > bounds_delta_gamma && bounds_delta_gamma > 0.0))
    throw ConfigError("[bounds] need gamma > delta_gamma > 0");
  if (locality_axis < 1 || locality_axis > 3) throw ConfigError("[locality] axis: must be 1, 2 or 3");
  if (checks.empty()) throw ConfigError("[run] checks: at least one check group must be enabled");
  for (const auto& c : checks)
    if (std::find(kCheckGroups.begin(), kCheckGroups.end(), c) == kCheckGroups.end())
      throw ConfigError("[run] checks: unknown group '" + c + "'");
  if (jobs < 1) throw ConfigError("[run] jobs: must be at least 1");
}

std::string ScanConfig::canonical() const {
  std::ostringstream os;
  os << "lattices=";
  for (std::size_t i = 0; i < lattices.size(); ++i) {
    os << (i ? "," : "");
    for (std::size_t a = 0; a < lattices[i].size(); ++a) os << (a ? "x" : "") << lattices[i][a];
  }
  os << "\nspin=" << spin.str() << "\nB=" << join(B) << "\np=" << join(p) << "\nkappa=" << fmt(kappa)
     << "\nepsilon=" << (epsilon ? fmt(*epsilon) : "auto") << "\ngamma=" << fmt(gamma)
     << "\ndelta_gamma=" << fmt(delta_gamma) << "\nbackend=" << static_cast<int>(backend)
     << "\nvmin_ladder=" << join(vmin_ladder) << "\nbounds_gamma=" << fmt(bounds_gamma)
     << "\nbounds_delta_gamma=" << fmt(bounds_delta_gamma) << "\nlanczos_tol=" << fmt(lanczos_tol)
     << "\nsolve_tol=" << fmt(solve_tol) << "\nchebyshev_tol=" << fmt(chebyshev_tol)
     << "\nchebyshev_max_degree=" << chebyshev_max_degree << "\nlocality_site=" << locality_site
     << "\nlocality_axis=" << locality_axis << "\nlocality_times=" << join(locality_times)
     << "\ncontinuity_ladder=" << join(continuity_ladder) << "\ncontinuity_factor=" << fmt(continuity_factor)
     << "\nlocality_filter=" << fmt(locality_epsilon) << "," << fmt(locality_gamma) << ","
     << fmt(locality_delta_gamma) << "\nlocality_m_max=" << locality_m_max
     << "\nlocality_max_dim=" << locality_max_dim << "\nlocality_B=" << fmt(locality_B)
     << "\ndense_cap=" << dense_cap << "\nseed=" << seed << "\nchecks=";
  for (const auto& c : checks) os << c << ";";
  os << "\ncorrupt_entry=" << corrupt_entry << "\n";
  return os.str();
}

std::string ScanConfig::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : canonical()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

ScanConfig parse_config_text(const std::string& text) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream is(text);
  try {
    pt::ini_parser::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError("config line " + std::to_string(e.line()) + ": " + e.message());
  }

  ScanConfig c;
  bool have_kappa = false;
  using Handler = std::function<void(const std::string&)>;
  const std::map<std::string, std::map<std::string, Handler>> schema = {
      {"lattice",
       {{"extents",
         [&](const std::string& v) {
           c.lattices.clear();
           for (const auto& item : split(v, ',')) c.lattices.push_back(parse_extents(item));
         }},
        {"spin", [&](const std::string& v) { c.spin = SpinMagnitude::parse(trim(v)); }}}},
      {"field", {{"B", [&](const std::string& v) { c.B = parse_reals(v); }}}},
      {"wavepacket",
       {{"p", [&](const std::string& v) { c.p = parse_reals(v); }},
        {"kappa",
         [&](const std::string& v) {
           c.kappa = parse_real(v);
           have_kappa = true;
         }}}},
      {"filter",
       {{"epsilon",
         [&](const std::string& v) {
           if (trim(v) == "auto")
             c.epsilon.reset();
           else
             c.epsilon = parse_real(v);
         }},
        {"gamma", [&](const std::string& v) { c.gamma = parse_real(v); }},
        {"delta_gamma", [&](const std::string& v) { c.delta_gamma = parse_real(v); }},
        {"backend",
         [&](const std::string& v) {
           const auto s = trim(v);
           if (s == "auto")
             c.backend = BackendChoice::automatic;
           else if (s == "dense")
             c.backend = BackendChoice::dense;
           else if (s == "chebyshev")
             c.backend = BackendChoice::chebyshev;
           else
             throw ConfigError("expected auto, dense or chebyshev");
         }}}},
      {"epsilon", {{"vmin_ladder", [&](const std::string& v) { c.vmin_ladder = parse_reals(v); }}}},
      {"bounds",
       {{"gamma", [&](const std::string& v) { c.bounds_gamma = parse_real(v); }},
        {"delta_gamma", [&](const std::string& v) { c.bounds_delta_gamma = parse_real(v); }}}},
      {"tolerances",
       {{"lanczos", [&](const std::string& v) { c.lanczos_tol = parse_real(v); }},
        {"solve", [&](const std::string& v) { c.solve_tol = parse_real(v); }},
        {"chebyshev", [&](const std::string& v) { c.chebyshev_tol = parse_real(v); }},
        {"chebyshev_max_degree", [&](const std::string& v) { c.chebyshev_max_degree = parse_int(v); }}}},
      {"locality",
       {{"site", [&](const std::string& v) { c.locality_site = parse_int(v); }},
        {"axis", [&](const std::string& v) { c.locality_axis = parse_int(v); }},
        {"t_grid", [&](const std::string& v) { c.locality_times = parse_reals(v); }},
        {"continuity_ladder", [&](const std::string& v) { c.continuity_ladder = parse_reals(v); }},
        {"continuity_factor", [&](const std::string& v) { c.continuity_factor = parse_real(v); }},
        {"epsilon", [&](const std::string& v) { c.locality_epsilon = parse_real(v); }},
        {"gamma", [&](const std::string& v) { c.locality_gamma = parse_real(v); }},
        {"delta_gamma", [&](const std::string& v) { c.locality_delta_gamma = parse_real(v); }},
        {"m_max", [&](const std::string& v) { c.locality_m_max = parse_int(v); }},
        {"max_dim", [&](const std::string& v) { c.locality_max_dim = static_cast<std::uint64_t>(parse_int(v)); }},
        {"B", [&](const std::string& v) { c.locality_B = parse_real(v); }}}},
      {"run",
       {{"dense_cap", [&](const std::string& v) { c.dense_cap = static_cast<std::uint64_t>(parse_int(v)); }},
        {"cache_dir", [&](const std::string& v) { c.cache_dir = trim(v); }},
        {"output_dir", [&](const std::string& v) { c.output_dir = trim(v); }},
        {"checks",
         [&](const std::string& v) {
           c.checks.clear();
           for (const auto& item : split(v, ',')) c.checks.insert(item);
         }},
        {"jobs", [&](const std::string& v) { c.jobs = parse_int(v); }},
        {"seed", [&](const std::string& v) { c.seed = static_cast<std::uint64_t>(parse_int(v)); }}}},
      {"debug", {{"corrupt_entry", [&](const std::string& v) { c.corrupt_entry = trim(v); }}}},
  };

  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty())
      throw ConfigError("key '" + section + "' appears outside any section");
    const auto sec = schema.find(section);
    if (sec == schema.end()) throw ConfigError("unknown section [" + section + "]");
    for (const auto& [key, value] : body) {
      const auto h = sec->second.find(key);
      if (h == sec->second.end()) throw ConfigError("unknown key [" + section + "] " + key);
      try {
        h->second(value.data());
      } catch (const ConfigError& e) {
        throw ConfigError("[" + section + "] " + key + ": " + e.what());
      } catch (const std::exception& e) {
        throw ConfigError("[" + section + "] " + key + ": " + e.what());
      }
    }
  }
  if (!have_kappa) c.kappa = std::numbers::pi;
  c.validate();
  return c;
}

ScanConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

}  // namespace ngdisp
