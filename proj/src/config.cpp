#include "fedrep/config.hpp"

#include <charconv>
#include <cstdio>
#include <functional>
#include <map>
#include <sstream>

#include "fedrep/error.hpp"

namespace fedrep {

std::string_view to_string(Aggregator a) { return a == Aggregator::kEua ? "eua" : "fedavg"; }
std::string_view to_string(AnchorMode a) { return a == AnchorMode::kFixed ? "fixed" : "fresh"; }
std::string_view to_string(agg::EuaBase b) { return b == agg::EuaBase::kFedAvg ? "fedavg" : "keep"; }

namespace {

[[noreturn]] void bad(std::string_view key, std::string_view why) {
  throw Error(ErrorKind::kConfig, "key '" + std::string(key) + "': " + std::string(why));
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <typename T>
T parse_number(std::string_view key, std::string_view v) {
  T out{};
  const auto* end = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end) bad(key, "cannot parse '" + std::string(v) + "'");
  return out;
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct Field {
  std::function<void(Config&, std::string_view, std::string_view)> set;
  std::function<std::string(const Config&)> get;
};

template <typename T>
Field number(T Config::*member) {
  return {[member](Config& c, std::string_view k, std::string_view v) { c.*member = parse_number<T>(k, v); },
          [member](const Config& c) {
            if constexpr (std::is_floating_point_v<T>) {
              return fmt_double(c.*member);
            } else {
              return std::to_string(c.*member);
            }
          }};
}

const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> table = {
      {"seed", number(&Config::seed)},
      {"num_classes", number(&Config::num_classes)},
      {"per_class", number(&Config::per_class)},
      {"dim", number(&Config::dim)},
      {"spread", number(&Config::spread)},
      {"K", number(&Config::clients)},
      {"alpha", number(&Config::alpha)},
      {"participation", number(&Config::participation)},
      {"rounds", number(&Config::rounds)},
      {"local_epochs", number(&Config::local_epochs)},
      {"batch", number(&Config::batch)},
      {"lr", number(&Config::lr)},
      {"clip", number(&Config::clip)},
      {"hidden", number(&Config::hidden)},
      {"embed_dim", number(&Config::embed_dim)},
      {"noise_sigma", number(&Config::noise_sigma)},
      {"mask_prob", number(&Config::mask_prob)},
      {"lambda_u", number(&Config::lambda_u)},
      {"tau_a", number(&Config::tau_a)},
      {"tau_b", number(&Config::tau_b)},
      {"anchors",
       {[](Config& c, std::string_view k, std::string_view v) {
          if (v == "fixed") c.anchors = AnchorMode::kFixed;
          else if (v == "fresh") c.anchors = AnchorMode::kFresh;
          else bad(k, "expected fixed|fresh");
        },
        [](const Config& c) { return std::string(to_string(c.anchors)); }}},
      {"uot_max_iters", number(&Config::uot_max_iters)},
      {"uot_tol", number(&Config::uot_tol)},
      {"aggregator",
       {[](Config& c, std::string_view k, std::string_view v) {
          if (v == "eua") c.aggregator = Aggregator::kEua;
          else if (v == "fedavg") c.aggregator = Aggregator::kFedAvg;
          else bad(k, "expected fedavg|eua");
        },
        [](const Config& c) { return std::string(to_string(c.aggregator)); }}},
      {"eua_base",
       {[](Config& c, std::string_view k, std::string_view v) {
          if (v == "keep") c.eua_base = agg::EuaBase::kKeep;
          else if (v == "fedavg") c.eua_base = agg::EuaBase::kFedAvg;
          else bad(k, "expected keep|fedavg");
        },
        [](const Config& c) { return std::string(to_string(c.eua_base)); }}},
      {"eta_g", number(&Config::eta_g)},
      {"eta_global",
       {[](Config& c, std::string_view k, std::string_view v) {
          if (v == "auto") c.eta_global.reset();
          else c.eta_global = parse_number<double>(k, v);
        },
        [](const Config& c) { return c.eta_global ? fmt_double(*c.eta_global) : std::string("auto"); }}},
      {"phi", number(&Config::phi)},
      {"rho", number(&Config::rho)},
      {"admm_max_iters", number(&Config::admm_max_iters)},
      {"admm_tol", number(&Config::admm_tol)},
      {"eval_every", number(&Config::eval_every)},
      {"knn_k", number(&Config::knn_k)},
  };
  return table;
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> out;
    for (const auto& [k, _] : fields()) out.push_back(k);
    return out;
  }();
  return keys;
}

void set_config_value(Config& cfg, std::string_view key, std::string_view value) {
  key = trim(key);
  value = trim(value);
  // Long-form aliases.
  if (key == "clients") key = "K";
  if (key == "E") key = "local_epochs";
  if (key == "T") key = "rounds";
  if (key == "B") key = "batch";
  for (const auto& [name, field] : fields()) {
    if (name == key) {
      if (value.empty()) bad(key, "empty value");
      field.set(cfg, key, value);
      return;
    }
  }
  bad(key, "unknown key");
}

Config parse_config(std::string_view text) {
  Config cfg;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorKind::kConfig, "line " + std::to_string(line_no) + ": expected key = value");
    }
    set_config_value(cfg, line.substr(0, eq), line.substr(eq + 1));
  }
  return cfg;
}

std::string render_config(const Config& cfg) {
  std::ostringstream os;
  for (const auto& [name, field] : fields()) os << name << " = " << field.get(cfg) << '\n';
  return os.str();
}

void Config::validate() const {
  if (num_classes < 2) bad("num_classes", "must be >= 2");
  if (per_class < 4) bad("per_class", "must be >= 4");
  if (dim < 2) bad("dim", "must be >= 2");
  if (spread < 0.0) bad("spread", "must be >= 0");
  if (clients < 1) bad("K", "must be >= 1");
  if (!(alpha > 0.0)) bad("alpha", "must be > 0");
  if (participation < 1.0) bad("participation", "partial participation is not supported");
  if (rounds < 0) bad("rounds", "must be >= 0");
  if (local_epochs < 0) bad("local_epochs", "must be >= 0");
  if (batch < 1) bad("batch", "must be >= 1");
  if (lr < 0.0) bad("lr", "must be >= 0");
  if (!(clip > 0.0)) bad("clip", "must be > 0");
  if (hidden < 1) bad("hidden", "must be >= 1");
  if (embed_dim < 1) bad("embed_dim", "must be >= 1");
  if (noise_sigma < 0.0) bad("noise_sigma", "must be >= 0");
  if (mask_prob < 0.0 || mask_prob >= 1.0) bad("mask_prob", "must be in [0, 1)");
  if (lambda_u < 0.0) bad("lambda_u", "must be >= 0");
  if (tau_a < 0.0) bad("tau_a", "must be >= 0");
  if (tau_b < 0.0) bad("tau_b", "must be >= 0");
  if (uot_max_iters < 0) bad("uot_max_iters", "must be >= 0");
  if (!(phi > 0.0)) bad("phi", "must be > 0");
  if (!(rho > 0.0)) bad("rho", "must be > 0");
  if (eta_global && *eta_global < 0.0) bad("eta_global", "must be >= 0 or auto");
  if (admm_max_iters < 1) bad("admm_max_iters", "must be >= 1");
  if (eval_every < 1) bad("eval_every", "must be >= 1");
  if (knn_k < 1) bad("knn_k", "must be >= 1");
  const int per_client_min = (num_classes * per_class * 4) / 5;
  if (clients > per_client_min) bad("K", "more clients than training samples");
}

}  // namespace fedrep
