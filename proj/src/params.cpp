#include "ips2pc/params.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace ips2pc {

std::string to_string(const ProtocolParams& p) {
  std::ostringstream os;
  os << "n=" << p.n << " k=" << p.k << " w=" << p.w << " t=" << p.t << " e=" << p.e << " sigma=" << p.sigma
     << " kappa=" << p.kappa << " s=" << p.s;
  return os.str();
}

std::vector<std::string> param_violations(const ProtocolParams& p, const PrimeField& F) {
  std::vector<std::string> v;
  if (p.w == 0) v.push_back("w >= 1");
  if (p.sigma == 0) v.push_back("sigma >= 1");
  if (p.t > p.n) v.push_back("t <= n");
  if (!(p.k > p.t + p.e + p.w)) v.push_back("k > t + e + w");
  if (!(3 * p.e < p.n - std::min(p.n, p.k)) || p.n <= p.k) v.push_back("e < (n - k) / 3");
  if (!is_power_of_two(p.k)) v.push_back("k is a power of two");
  if (p.n < 2 * p.k) v.push_back("n >= 2k");
  if (p.n < 2 * p.k + p.e) v.push_back("n >= 2k + e");
  if (p.n > 0 && 2 * next_power_of_two(p.n) > (std::size_t{1} << std::min(F.two_adicity(), 40u)))
    v.push_back("2 * next_pow2(n) <= 2^two_adicity");
  return v;
}

void validate_params(const ProtocolParams& p, const PrimeField& F) {
  auto v = param_violations(p, F);
  if (v.empty()) return;
  std::string msg = "invalid protocol parameters (" + to_string(p) + "): violates";
  for (std::size_t i = 0; i < v.size(); ++i) msg += (i ? ", " : " ") + v[i];
  throw ParamsError(msg);
}

long double soundness_outer(std::size_t e, std::size_t sigma, long double field_size) {
  return static_cast<long double>(e + 2) / std::pow(field_size, static_cast<long double>(sigma));
}

long double soundness_outer(const ProtocolParams& p, const PrimeField& F) {
  return soundness_outer(p.e, p.sigma, static_cast<long double>(F.modulus()));
}

double log2_soundness_outer(const ProtocolParams& p, const PrimeField& F) {
  return std::log2(static_cast<double>(p.e + 2)) -
         static_cast<double>(p.sigma) * std::log2(static_cast<double>(F.modulus()));
}

long double soundness_watchlist(const ProtocolParams& p) {
  const long double n = static_cast<long double>(p.n), t = static_cast<long double>(p.t);
  const long double a = 1.0L - static_cast<long double>(p.e) / n;
  const long double b = static_cast<long double>(3 * p.e + 2 * p.w + 2 * p.t) / n;
  return std::pow(a, t) + std::pow(b, t);
}

long double soundness_combined(const ProtocolParams& p, const PrimeField& F) {
  return soundness_outer(p, F) + soundness_watchlist(p);
}

std::size_t min_sigma(std::size_t e, const PrimeField& F, unsigned bits) {
  const double per = std::log2(static_cast<double>(F.modulus()));
  const double need = static_cast<double>(bits) + std::log2(static_cast<double>(e + 2));
  std::size_t sigma = static_cast<std::size_t>(std::ceil(need / per));
  return std::max<std::size_t>(sigma, 1);
}

ProtocolParams select_params(std::size_t n, unsigned target_s, const PrimeField& F, unsigned kappa) {
  const long double target = std::ldexp(1.0L, -static_cast<int>(target_s));
  ProtocolParams best;
  bool found = false, structural = false;
  long double closest = INFINITY;
  for (std::size_t k = 2; 2 * k <= n; k *= 2) {
    for (std::size_t e = 0; 3 * e < n - k && 2 * k + e <= n && e + 2 < k; ++e) {
      // w = k - 1 - t - e >= 1 bounds t from above
      const std::size_t t_max = k - 2 - e;
      if (t_max < 1) break;
      structural = true;
      ProtocolParams p;
      p.n = n;
      p.k = k;
      p.e = e;
      p.kappa = kappa;
      p.s = target_s;
      p.sigma = min_sigma(e, F, target_s + 1);
      auto ok = [&](std::size_t t) {
        p.t = t;
        p.w = k - 1 - t - e;
        const long double b = soundness_combined(p, F);
        closest = std::min(closest, b);
        return target_s == 0 || b <= target;
      };
      // with w = k - 1 - t - e the second watchlist term has a t-independent
      // base, so the bound is monotone decreasing in t: binary search
      std::size_t lo = 1, hi = t_max;
      if (!ok(hi)) continue;
      while (lo < hi) {
        const std::size_t mid = (lo + hi) / 2;
        if (ok(mid)) hi = mid;
        else lo = mid + 1;
      }
      ok(lo);
      if (!found || p.w > best.w) {
        best = p;
        found = true;
      }
    }
  }
  if (!structural)
    throw ParamsError("select_params: no power-of-two k with 2k <= n admits w >= 1 and t >= 1 (n = " +
                      std::to_string(n) + ")");
  if (!found) {
    std::ostringstream os;
    os << "select_params: soundness 2^-" << target_s << " unreachable at n = " << n << " (best combined bound "
       << static_cast<double>(closest) << ")";
    throw ParamsError(os.str());
  }
  return best;
}

ProtocolParams toy_params_a() { return {16, 4, 1, 1, 1, 1}; }
ProtocolParams toy_params_b() { return {32, 8, 2, 2, 3, 1}; }
ProtocolParams watch_params() { return {8, 4, 1, 2, 0, 1}; }
ProtocolParams nn_params() { return {64, 16, 8, 4, 3, 1}; }

ProtocolParams named_params(const std::string& name) {
  if (name == "toy-a") return toy_params_a();
  if (name == "toy-b") return toy_params_b();
  if (name == "watch") return watch_params();
  if (name == "nn") return nn_params();
  throw ParamsError("unknown parameter set '" + name + "' (known: toy-a, toy-b, watch, nn)");
}

ProtocolParams parse_params(const std::string& text) {
  ProtocolParams p;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  auto fail = [&](const std::string& why) {
    throw ParamsError("params line " + std::to_string(lineno) + ": " + why);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
    const auto eq = line.find('=');
    auto trim = [](std::string v) {
      const auto b = v.find_first_not_of(" \t\r");
      if (b == std::string::npos) return std::string();
      return v.substr(b, v.find_last_not_of(" \t\r") - b + 1);
    };
    if (trim(line).empty()) continue;
    if (eq == std::string::npos) fail("expected key = value");
    const std::string key = trim(line.substr(0, eq)), val = trim(line.substr(eq + 1));
    if (key == "preset") {
      p = named_params(val);
      continue;
    }
    std::size_t used = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(val, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != val.size() || val[0] == '-' || val[0] == '+') fail("'" + val + "' is not a non-negative integer");
    if (key == "n") p.n = v;
    else if (key == "k") p.k = v;
    else if (key == "w") p.w = v;
    else if (key == "t") p.t = v;
    else if (key == "e") p.e = v;
    else if (key == "sigma") p.sigma = v;
    else if (key == "kappa") p.kappa = static_cast<unsigned>(v);
    else if (key == "s") p.s = static_cast<unsigned>(v);
    else fail("unknown key '" + key + "'");
  }
  return p;
}

ProtocolParams load_params(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ParamsError("cannot open params file " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_params(ss.str());
}

}  // namespace ips2pc
