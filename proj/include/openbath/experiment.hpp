#pragma once

// Experiment configuration (YAML), the run pipeline and the auxiliary
// table/spectrum writers behind the command-line tool.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <yaml-cpp/yaml.h>

#include "openbath/bath_models.hpp"
#include "openbath/bcf_features.hpp"
#include "openbath/discretization.hpp"
#include "openbath/heom.hpp"
#include "openbath/model_systems.hpp"
#include "openbath/tdse.hpp"
#include "openbath/trajectory.hpp"

#ifndef OPENBATH_VERSION
#define OPENBATH_VERSION "unknown"
#endif

namespace openbath {

inline constexpr const char* version = OPENBATH_VERSION;

// Validation failure carrying a "source:line:column: " prefix.
class ConfigError : public DomainError {
public:
    explicit ConfigError(const std::string& what) : DomainError(what) {}
};

struct TwoLevelSystem {
    double E = 0.0, V = 0.0;
};
struct FmoSystem {};
using SystemBlock = std::variant<TwoLevelSystem, FmoSystem>;

struct BathBlock {
    BathSpec spec;
    bool per_site = true;
};

struct HeomMethod {
    PoleSeriesKind series = PoleSeriesKind::Pade;
    int order = 3;
    int per_mode_cap = 20;
    std::optional<int> level_cap;
    HeomIntegrator integrator = HeomIntegrator::IntegratingFactor;
};

struct DiscretizationBlock {
    DiscretizationStrategy strategy = DiscretizationStrategy::Equalized;
    int count = 8; // K per side for log/equalized, J_total for bsdo
    double omega_min = 0.01;
    double omega_c = 1000.0;
};

struct TdseMethod {
    DiscretizationBlock discretization;
    int mode_dim = 2;
    bool rate_correction = false;
    KrylovOptions krylov;
};

// Closed-form pure dephasing: continuum, or the discrete bath when given.
struct DephasingOracleMethod {
    std::optional<DiscretizationBlock> discretization;
};

using MethodBlock = std::variant<HeomMethod, TdseMethod, DephasingOracleMethod>;

enum class InitialKind { Superposition, Ground, Excited, Site };

struct InitialState {
    InitialKind kind = InitialKind::Superposition;
    int site = 1; // 1-based
};

struct RunBlock {
    double t_end = 0.0;
    double sample_dt = 1.0;
    double rtol = 1e-8;
    double atol = 1e-10;
    std::optional<InitialState> initial;
};

enum class ObservableBasis { Site, Eigen };

struct OutputBlock {
    std::string trajectory = "trajectory.csv";
    std::string manifest = "manifest.yaml";
    std::string spectrum = "spectrum.csv";
    std::string features = "features.txt";
    std::string discretization = "discrete_bath.txt";
    ObservableBasis basis = ObservableBasis::Site;
};

struct SpectrumBlock {
    std::vector<double> grid; // cm^-1, ascending
    double sigma = 300.0;     // fs
};

struct ExperimentConfig {
    std::string source = "<config>";
    std::optional<SystemBlock> system;
    BathBlock bath;
    MethodBlock method;
    std::optional<RunBlock> run;
    OutputBlock output;
    std::optional<SpectrumBlock> spectrum;
};

namespace detail {

class Reader {
public:
    explicit Reader(std::string source) : source_(std::move(source)) {}

    [[noreturn]] void fail(const YAML::Node& at, const std::string& msg) const {
        const auto m = at.Mark();
        std::ostringstream os;
        os << source_;
        if (!m.is_null()) os << ':' << m.line + 1 << ':' << m.column + 1;
        os << ": " << msg;
        throw ConfigError(os.str());
    }

    YAML::Node map(const YAML::Node& parent, const std::string& key, const std::string& path, bool required) const {
        const YAML::Node n = parent[key];
        if (!n) {
            if (required) fail(parent, "missing required block '" + path + "'");
            return n;
        }
        if (!n.IsMap()) fail(n, "'" + path + "' must be a mapping");
        return n;
    }

    void only_keys(const YAML::Node& n, const std::string& path, std::initializer_list<const char*> keys) const {
        const std::set<std::string> allowed(keys.begin(), keys.end());
        for (const auto& kv : n) {
            const auto k = kv.first.as<std::string>();
            if (!allowed.count(k)) {
                std::string list;
                for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
                fail(kv.first, "unknown key '" + k + "' in '" + path + "' (allowed: " + list + ")");
            }
        }
    }

    double number(const YAML::Node& parent, const std::string& key, const std::string& path,
                  std::optional<double> fallback = std::nullopt) const {
        const YAML::Node n = parent[key];
        if (!n) {
            if (!fallback) fail(parent, "missing required value '" + path + "." + key + "'");
            return *fallback;
        }
        try {
            const double v = n.as<double>();
            if (!std::isfinite(v)) fail(n, "'" + path + "." + key + "' must be finite");
            return v;
        } catch (const YAML::Exception&) {
            fail(n, "'" + path + "." + key + "' must be a number");
        }
    }

    int integer(const YAML::Node& parent, const std::string& key, const std::string& path,
                std::optional<int> fallback = std::nullopt) const {
        const YAML::Node n = parent[key];
        if (!n) {
            if (!fallback) fail(parent, "missing required value '" + path + "." + key + "'");
            return *fallback;
        }
        try {
            return n.as<int>();
        } catch (const YAML::Exception&) {
            fail(n, "'" + path + "." + key + "' must be an integer");
        }
    }

    bool boolean(const YAML::Node& parent, const std::string& key, const std::string& path, bool fallback) const {
        const YAML::Node n = parent[key];
        if (!n) return fallback;
        try {
            return n.as<bool>();
        } catch (const YAML::Exception&) {
            fail(n, "'" + path + "." + key + "' must be true or false");
        }
    }

    std::string text(const YAML::Node& parent, const std::string& key, const std::string& path,
                     std::optional<std::string> fallback = std::nullopt) const {
        const YAML::Node n = parent[key];
        if (!n) {
            if (!fallback) fail(parent, "missing required value '" + path + "." + key + "'");
            return *fallback;
        }
        if (!n.IsScalar()) fail(n, "'" + path + "." + key + "' must be a string");
        return n.as<std::string>();
    }

    // Run f, re-anchoring library precondition failures at node n.
    template <class F>
    auto check(const YAML::Node& n, F&& f) const {
        try {
            return f();
        } catch (const ConfigError&) {
            throw;
        } catch (const DomainError& e) {
            fail(n, e.what());
        }
    }

private:
    std::string source_;
};

inline BathBlock parse_bath(const Reader& r, const YAML::Node& n) {
    r.only_keys(n, "bath", {"model", "lambda", "gamma", "tau", "Omega", "omega1", "temperature", "per_site"});
    const std::string model = r.text(n, "model", "bath");
    const double lambda = r.number(n, "lambda", "bath");
    const double T = r.number(n, "temperature", "bath");
    BathBlock b;
    if (model == "drude_lorentz") {
        if (n["Omega"] || n["omega1"]) r.fail(n, "Omega/omega1 apply only to the brownian model");
        if (n["gamma"] && n["tau"]) r.fail(n["tau"], "give either bath.gamma or bath.tau, not both");
        double gamma;
        if (n["tau"]) {
            const double tau = r.number(n, "tau", "bath");
            if (!(tau > 0.0)) r.fail(n["tau"], "bath.tau must be positive");
            gamma = from_angular(1.0 / tau);
        } else {
            gamma = r.number(n, "gamma", "bath");
        }
        b.spec = {DrudeLorentz{lambda, gamma}, T};
    } else if (model == "brownian") {
        if (n["tau"]) r.fail(n["tau"], "bath.tau applies only to the drude_lorentz model");
        const double gamma = r.number(n, "gamma", "bath");
        if (n["Omega"] && n["omega1"]) r.fail(n["omega1"], "give either bath.Omega or bath.omega1, not both");
        if (n["omega1"])
            b.spec = {Brownian::from_effective_frequency(lambda, gamma, r.number(n, "omega1", "bath")), T};
        else
            b.spec = {Brownian{lambda, gamma, r.number(n, "Omega", "bath")}, T};
    } else {
        r.fail(n["model"], "bath.model must be drude_lorentz or brownian, got '" + model + "'");
    }
    if (!(T > 0.0)) r.fail(n["temperature"], "bath.temperature must be positive");
    r.check(n, [&] {
        validate(b.spec);
        return 0;
    });
    b.per_site = r.boolean(n, "per_site", "bath", true);
    return b;
}

inline DiscretizationBlock parse_discretization(const Reader& r, const YAML::Node& n, const std::string& path) {
    DiscretizationBlock d;
    const std::string s = r.text(n, "strategy", path, std::string("equalized"));
    d.strategy = r.check(n["strategy"] ? n["strategy"] : n, [&] { return parse_strategy(s); });
    if (d.strategy == DiscretizationStrategy::BSDO) {
        if (n["K"]) r.fail(n["K"], path + ".K applies to log/equalized; bsdo takes J_total");
        d.count = r.integer(n, "J_total", path);
    } else {
        if (n["J_total"]) r.fail(n["J_total"], path + ".J_total applies to bsdo; log/equalized take K per side");
        d.count = r.integer(n, "K", path);
    }
    if (d.count < 1) r.fail(n, path + ": mode count must be at least 1");
    d.omega_c = r.number(n, "omega_c", path, 1000.0);
    if (!(d.omega_c > 0.0)) r.fail(n["omega_c"], path + ".omega_c must be positive");
    if (n["omega_min"] && d.strategy != DiscretizationStrategy::Log)
        r.fail(n["omega_min"], path + ".omega_min applies only to the log strategy");
    d.omega_min = r.number(n, "omega_min", path, 0.01);
    if (d.strategy == DiscretizationStrategy::Log && !(d.omega_min > 0.0 && d.omega_min < d.omega_c))
        r.fail(n["omega_min"] ? n["omega_min"] : n, path + ".omega_min must lie in (0, omega_c)");
    return d;
}

inline MethodBlock parse_method(const Reader& r, const YAML::Node& m) {
    r.only_keys(m, "method", {"heom", "tdse", "dephasing_oracle"});
    if (m.size() != 1) r.fail(m, "method must contain exactly one of heom, tdse, dephasing_oracle");
    if (const auto n = m["heom"]) {
        if (!n.IsMap()) r.fail(n, "'method.heom' must be a mapping");
        r.only_keys(n, "method.heom", {"series", "N", "per_mode_cap", "level_cap", "integrator"});
        HeomMethod h;
        const std::string s = r.text(n, "series", "method.heom", std::string("pade"));
        if (s == "pade")
            h.series = PoleSeriesKind::Pade;
        else if (s == "matsubara")
            h.series = PoleSeriesKind::Matsubara;
        else
            r.fail(n["series"], "method.heom.series must be pade or matsubara");
        h.order = r.integer(n, "N", "method.heom");
        if (h.order < (h.series == PoleSeriesKind::Pade ? 1 : 0))
            r.fail(n["N"], "method.heom.N must be at least " + std::string(h.series == PoleSeriesKind::Pade ? "1" : "0"));
        h.per_mode_cap = r.integer(n, "per_mode_cap", "method.heom", 20);
        if (h.per_mode_cap < 1 || h.per_mode_cap > 255)
            r.fail(n["per_mode_cap"], "method.heom.per_mode_cap must be in [1, 255]");
        if (n["level_cap"] && !n["level_cap"].IsNull()) {
            h.level_cap = r.integer(n, "level_cap", "method.heom");
            if (*h.level_cap < 1) r.fail(n["level_cap"], "method.heom.level_cap must be at least 1");
        }
        const std::string integ = r.text(n, "integrator", "method.heom", std::string("lawson"));
        if (integ == "lawson")
            h.integrator = HeomIntegrator::IntegratingFactor;
        else if (integ == "rk45")
            h.integrator = HeomIntegrator::RungeKutta;
        else
            r.fail(n["integrator"], "method.heom.integrator must be lawson or rk45");
        return h;
    }
    if (const auto n = m["tdse"]) {
        if (!n.IsMap()) r.fail(n, "'method.tdse' must be a mapping");
        r.only_keys(n, "method.tdse",
                    {"strategy", "K", "J_total", "omega_min", "omega_c", "mode_dims", "rate_correction", "krylov_dim",
                     "dt", "tol"});
        TdseMethod t;
        t.discretization = parse_discretization(r, n, "method.tdse");
        t.mode_dim = r.integer(n, "mode_dims", "method.tdse", 2);
        if (t.mode_dim < 2) r.fail(n["mode_dims"], "method.tdse.mode_dims must be at least 2");
        t.rate_correction = r.boolean(n, "rate_correction", "method.tdse", false);
        t.krylov.m = r.integer(n, "krylov_dim", "method.tdse", 16);
        if (t.krylov.m < 2) r.fail(n["krylov_dim"], "method.tdse.krylov_dim must be at least 2");
        t.krylov.dt = r.number(n, "dt", "method.tdse", 0.25);
        if (!(t.krylov.dt > 0.0)) r.fail(n["dt"], "method.tdse.dt must be positive");
        t.krylov.tol = r.number(n, "tol", "method.tdse", 1e-10);
        if (!(t.krylov.tol > 0.0)) r.fail(n["tol"], "method.tdse.tol must be positive");
        return t;
    }
    const auto n = m["dephasing_oracle"];
    DephasingOracleMethod o;
    if (n && n.IsMap() && n.size() > 0) {
        r.only_keys(n, "method.dephasing_oracle", {"strategy", "K", "J_total", "omega_min", "omega_c"});
        o.discretization = parse_discretization(r, n, "method.dephasing_oracle");
    } else if (n && !n.IsNull() && !n.IsMap()) {
        r.fail(n, "'method.dephasing_oracle' must be a mapping");
    }
    return o;
}

inline InitialState parse_initial(const Reader& r, const YAML::Node& n) {
    InitialState s;
    if (n.IsScalar()) {
        const auto v = n.as<std::string>();
        if (v == "superposition")
            s.kind = InitialKind::Superposition;
        else if (v == "ground")
            s.kind = InitialKind::Ground;
        else if (v == "excited")
            s.kind = InitialKind::Excited;
        else
            r.fail(n, "run.initial must be superposition, ground, excited or {site: n}");
        return s;
    }
    if (!n.IsMap()) r.fail(n, "run.initial must be superposition, ground, excited or {site: n}");
    r.only_keys(n, "run.initial", {"site"});
    s.kind = InitialKind::Site;
    s.site = r.integer(n, "site", "run.initial");
    return s;
}

inline ObservableBasis parse_basis(const Reader& r, const YAML::Node& n) {
    if (!n) return ObservableBasis::Site;
    if (!n.IsScalar()) r.fail(n, "output.basis must be site or eigen");
    const auto v = n.as<std::string>();
    if (v == "site") return ObservableBasis::Site;
    if (v == "eigen") return ObservableBasis::Eigen;
    r.fail(n, "output.basis must be site or eigen");
}

inline Eigen::Index system_dim(const SystemBlock& s) { return std::holds_alternative<FmoSystem>(s) ? 7 : 2; }

} // namespace detail

inline ExperimentConfig parse_config(const YAML::Node& root, const std::string& source = "<config>") {
    detail::Reader r(source);
    if (!root.IsMap()) r.fail(root, "configuration must be a mapping");
    r.only_keys(root, "top level", {"system", "bath", "method", "run", "output", "spectrum"});
    ExperimentConfig c;
    c.source = source;

    if (const auto s = r.map(root, "system", "system", false)) {
        r.only_keys(s, "system", {"two_level", "fmo"});
        if (s.size() != 1) r.fail(s, "system must contain exactly one of two_level, fmo");
        if (const auto t = s["two_level"]) {
            if (!t.IsMap()) r.fail(t, "'system.two_level' must be a mapping");
            r.only_keys(t, "system.two_level", {"E", "V"});
            c.system = TwoLevelSystem{r.number(t, "E", "system.two_level"), r.number(t, "V", "system.two_level")};
        } else {
            const auto f = s["fmo"];
            if (f && !f.IsNull() && !(f.IsMap() && f.size() == 0)) r.fail(f, "'system.fmo' takes no parameters");
            c.system = FmoSystem{};
        }
    }

    c.bath = detail::parse_bath(r, r.map(root, "bath", "bath", true));
    c.method = detail::parse_method(r, r.map(root, "method", "method", true));

    if (const auto run = r.map(root, "run", "run", false)) {
        r.only_keys(run, "run", {"t_end", "sample_dt", "rtol", "atol", "initial"});
        RunBlock b;
        b.t_end = r.number(run, "t_end", "run");
        b.sample_dt = r.number(run, "sample_dt", "run", 1.0);
        if (!(b.t_end > 0.0)) r.fail(run["t_end"], "run.t_end must be positive (empty time range)");
        if (!(b.sample_dt > 0.0)) r.fail(run["sample_dt"], "run.sample_dt must be positive");
        if (b.sample_dt > b.t_end) r.fail(run["sample_dt"], "run.sample_dt exceeds run.t_end");
        b.rtol = r.number(run, "rtol", "run", 1e-8);
        b.atol = r.number(run, "atol", "run", 1e-10);
        if (!(b.rtol > 0.0)) r.fail(run["rtol"], "run.rtol must be positive");
        if (!(b.atol > 0.0)) r.fail(run["atol"], "run.atol must be positive");
        if (run["initial"]) b.initial = detail::parse_initial(r, run["initial"]);
        c.run = b;
    }

    if (const auto o = r.map(root, "output", "output", false)) {
        r.only_keys(o, "output", {"trajectory", "manifest", "spectrum", "features", "discretization", "basis"});
        c.output.trajectory = r.text(o, "trajectory", "output", c.output.trajectory);
        c.output.manifest = r.text(o, "manifest", "output", c.output.manifest);
        c.output.spectrum = r.text(o, "spectrum", "output", c.output.spectrum);
        c.output.features = r.text(o, "features", "output", c.output.features);
        c.output.discretization = r.text(o, "discretization", "output", c.output.discretization);
        c.output.basis = detail::parse_basis(r, o["basis"]);
    }

    if (const auto sp = r.map(root, "spectrum", "spectrum", false)) {
        r.only_keys(sp, "spectrum", {"grid", "sigma"});
        SpectrumBlock b;
        b.sigma = r.number(sp, "sigma", "spectrum", 300.0);
        if (!(b.sigma > 0.0)) r.fail(sp["sigma"], "spectrum.sigma must be positive");
        const auto g = sp["grid"];
        if (!g) r.fail(sp, "missing required value 'spectrum.grid'");
        if (g.IsSequence()) {
            for (const auto& v : g) {
                try {
                    b.grid.push_back(v.as<double>());
                } catch (const YAML::Exception&) {
                    r.fail(v, "spectrum.grid entries must be numbers");
                }
            }
        } else if (g.IsMap()) {
            r.only_keys(g, "spectrum.grid", {"min", "max", "step"});
            const double lo = r.number(g, "min", "spectrum.grid"), hi = r.number(g, "max", "spectrum.grid");
            const double st = r.number(g, "step", "spectrum.grid");
            if (!(st > 0.0)) r.fail(g["step"], "spectrum.grid.step must be positive");
            const auto n = static_cast<long>(std::floor((hi - lo) / st + 1e-9));
            for (long i = 0; i <= n; ++i) b.grid.push_back(lo + st * static_cast<double>(i));
        } else {
            r.fail(g, "spectrum.grid must be a list or {min, max, step}");
        }
        for (std::size_t i = 1; i < b.grid.size(); ++i)
            if (!(b.grid[i] > b.grid[i - 1])) r.fail(g, "spectrum.grid must be strictly ascending");
        c.spectrum = b;
    }

    // cross-block rules
    if (c.system) {
        if (std::holds_alternative<FmoSystem>(*c.system) && !c.bath.per_site)
            r.fail(root["bath"], "fmo requires bath.per_site: true (one bath per site)");
        if (std::holds_alternative<DephasingOracleMethod>(c.method)) {
            const auto* t = std::get_if<TwoLevelSystem>(&*c.system);
            if (!t || t->V != 0.0)
                r.fail(root["method"], "dephasing_oracle requires a two_level system with V = 0");
        }
        if (const auto* t = std::get_if<TdseMethod>(&c.method)) {
            if (t->rate_correction && !std::holds_alternative<TwoLevelSystem>(*c.system))
                r.fail(root["method"], "rate_correction applies only to two_level systems");
            if (t->rate_correction && std::get<TwoLevelSystem>(*c.system).V == 0.0 &&
                std::get<TwoLevelSystem>(*c.system).E == 0.0)
                r.fail(root["method"], "rate_correction needs a nonzero level splitting");
        }
        if (c.run && c.run->initial && c.run->initial->kind == InitialKind::Site) {
            const auto d = detail::system_dim(*c.system);
            if (c.run->initial->site < 1 || c.run->initial->site > d)
                r.fail(root["run"]["initial"], "run.initial.site must be in [1, " + std::to_string(d) + "]");
        }
    }
    return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
    YAML::Node root;
    try {
        root = YAML::LoadFile(path.string());
    } catch (const YAML::BadFile&) {
        throw ConfigError(path.string() + ": cannot open configuration file");
    } catch (const YAML::ParserException& e) {
        throw ConfigError(path.string() + ":" + std::to_string(e.mark.line + 1) + ":" +
                          std::to_string(e.mark.column + 1) + ": " + e.msg);
    }
    return parse_config(root, path.string());
}

inline ExperimentConfig load_config_string(const std::string& text, const std::string& source = "<string>") {
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::ParserException& e) {
        throw ConfigError(source + ":" + std::to_string(e.mark.line + 1) + ":" + std::to_string(e.mark.column + 1) +
                          ": " + e.msg);
    }
    return parse_config(root, source);
}

// --- resolution -----------------------------------------------------------

inline SystemModel build_system(const ExperimentConfig& c) {
    if (!c.system) throw ConfigError(c.source + ": run requires a system block");
    if (const auto* t = std::get_if<TwoLevelSystem>(&*c.system)) return two_level(t->E, t->V, c.bath.spec);
    return fmo(c.bath.spec);
}

inline Matrix observable_basis(const ExperimentConfig& c, const SystemModel& sys) {
    if (c.output.basis == ObservableBasis::Site) return Matrix::Identity(sys.dim(), sys.dim());
    if (const auto* t = std::get_if<TwoLevelSystem>(&*c.system)) return two_level_eigenbasis(t->E, t->V);
    return eigenbasis(sys.H);
}

inline Vector initial_vector(const ExperimentConfig& c, const SystemModel& sys) {
    const auto d = sys.dim();
    InitialState s;
    if (c.run && c.run->initial)
        s = *c.run->initial;
    else if (std::holds_alternative<FmoSystem>(*c.system))
        s = {InitialKind::Site, 1};
    Vector v = Vector::Zero(d);
    switch (s.kind) {
    case InitialKind::Superposition:
        v.setConstant(1.0 / std::sqrt(static_cast<double>(d)));
        break;
    case InitialKind::Site:
        v(s.site - 1) = 1.0;
        break;
    case InitialKind::Ground:
    case InitialKind::Excited: {
        Matrix U = std::holds_alternative<TwoLevelSystem>(*c.system)
                       ? two_level_eigenbasis(std::get<TwoLevelSystem>(*c.system).E, std::get<TwoLevelSystem>(*c.system).V)
                       : eigenbasis(sys.H);
        v = U.col(s.kind == InitialKind::Ground ? 0 : d - 1);
        break;
    }
    }
    return v;
}

inline std::string to_string(InitialKind k) {
    switch (k) {
    case InitialKind::Superposition: return "superposition";
    case InitialKind::Ground: return "ground";
    case InitialKind::Excited: return "excited";
    default: return "site";
    }
}

inline PoleSeries pole_series(const HeomMethod& h, double temperature) {
    return h.series == PoleSeriesKind::Pade ? pade_pole_series(h.order, temperature)
                                            : matsubara_pole_series(h.order, temperature);
}

inline FeatureSet resolve_features(const ExperimentConfig& c) {
    const auto* h = std::get_if<HeomMethod>(&c.method);
    if (!h) throw ConfigError(c.source + ": feature decomposition requires method.heom");
    return decompose(c.bath.spec, pole_series(*h, c.bath.spec.temperature));
}

inline DiscreteBath discretize(const BathSpec& spec, const DiscretizationBlock& d) {
    switch (d.strategy) {
    case DiscretizationStrategy::Log: return discretize_logarithmic(spec, d.count, d.omega_min, d.omega_c);
    case DiscretizationStrategy::Equalized: return discretize_equalized(spec, d.count, d.omega_c);
    default: return discretize_bsdo(spec, d.count, d.omega_c);
    }
}

inline DiscreteBath resolve_discrete_bath(const ExperimentConfig& c) {
    if (const auto* t = std::get_if<TdseMethod>(&c.method)) return discretize(c.bath.spec, t->discretization);
    if (const auto* o = std::get_if<DephasingOracleMethod>(&c.method); o && o->discretization)
        return discretize(c.bath.spec, *o->discretization);
    throw ConfigError(c.source + ": discretization requires method.tdse or a discretized dephasing_oracle");
}

inline std::vector<double> sample_times(const RunBlock& r) {
    std::vector<double> t;
    const auto n = static_cast<long>(std::floor(r.t_end / r.sample_dt + 1e-9));
    for (long i = 0; i <= n; ++i) t.push_back(r.sample_dt * static_cast<double>(i));
    if (t.back() < r.t_end - 1e-9 * r.t_end) t.push_back(r.t_end);
    return t;
}

// --- run ------------------------------------------------------------------

struct RunOptions {
    int threads = 1;
    bool verbose = false;
    std::ostream* log = nullptr;
};

struct RunResult {
    Trajectory trajectory; // in the declared output basis
    YAML::Node manifest;
};

namespace detail {

inline YAML::Node bath_node(const BathBlock& b) {
    YAML::Node n;
    n["model"] = model_name(b.spec.model);
    std::visit(
        [&](const auto& m) {
            n["lambda"] = m.lambda;
            n["gamma"] = m.gamma;
            if constexpr (std::is_same_v<std::decay_t<decltype(m)>, Brownian>) {
                n["Omega"] = m.Omega;
                n["omega1"] = m.omega1();
            }
        },
        b.spec.model);
    n["temperature"] = b.spec.temperature;
    n["per_site"] = b.per_site;
    return n;
}

inline YAML::Node discretization_node(const DiscretizationBlock& d, const DiscreteBath& b) {
    YAML::Node n;
    n["strategy"] = to_string(d.strategy);
    n[d.strategy == DiscretizationStrategy::BSDO ? "J_total" : "K"] = d.count;
    if (d.strategy == DiscretizationStrategy::Log) n["omega_min"] = d.omega_min;
    n["omega_c"] = d.omega_c;
    n["modes"] = static_cast<int>(b.size());
    n["total_weight"] = b.total_weight();
    return n;
}

inline Trajectory run_heom(const ExperimentConfig& c, const HeomMethod& h, const SystemModel& sys, const Matrix& rho0,
                           const std::vector<double>& times, const RunOptions& opt, YAML::Node& man) {
    const auto series = pole_series(h, c.bath.spec.temperature);
    std::vector<BathCoupling> baths;
    for (const auto& cp : sys.couplings) baths.push_back({cp.Q, decompose(cp.bath, series)});
    HierarchySpec hs;
    hs.per_mode_cap = h.per_mode_cap;
    hs.level_cap = h.level_cap;
    HeomGenerator gen(sys.H, baths, hs);
    gen.set_threads(opt.threads);
    auto state = init_state(rho0, gen);
    YAML::Node m;
    m["series"] = to_string(h.series);
    m["N"] = h.order;
    m["features_per_bath"] = static_cast<int>(baths.front().features.size());
    m["baths"] = static_cast<int>(baths.size());
    m["total_features"] = static_cast<int>(baths.size() * baths.front().features.size());
    m["residual_bound"] = baths.front().features.residual_bound;
    m["per_mode_cap"] = h.per_mode_cap;
    if (h.level_cap)
        m["level_cap"] = *h.level_cap;
    else
        m["level_cap"] = YAML::Node(YAML::NodeType::Null);
    m["ado_count"] = static_cast<unsigned long>(gen.ado_count());
    m["integrator"] = h.integrator == HeomIntegrator::IntegratingFactor ? "lawson" : "rk45";
    if (opt.verbose && opt.log)
        *opt.log << "heom: " << m["total_features"].as<int>() << " features, " << gen.ado_count() << " ADOs\n";
    OdeOptions oo;
    oo.rtol = c.run->rtol;
    oo.atol = c.run->atol;
    OdeStats st;
    std::function<void(double, const Matrix&)> monitor;
    if (opt.verbose && opt.log) {
        const double step = std::max(times.back() / 20.0, c.run->sample_dt);
        double next = step;
        monitor = [&, next](double t, const Matrix& rho) mutable {
            if (t + 1e-9 >= next) {
                *opt.log << "  t = " << t << " fs, trace = " << rho.trace().real() << "\n";
                next += step;
            }
        };
    }
    auto traj = propagate(gen, state, times, oo, &st, monitor, h.integrator);
    m["accepted_steps"] = static_cast<unsigned long>(st.accepted);
    m["rejected_steps"] = static_cast<unsigned long>(st.rejected);
    man["method"]["heom"] = m;
    return traj;
}

inline Trajectory run_tdse(const ExperimentConfig& c, const TdseMethod& t, const SystemModel& sys, const Vector& psi0,
                           const std::vector<double>& times, const RunOptions& opt, YAML::Node& man) {
    std::vector<BathAttachment> baths;
    DiscreteBath first;
    for (const auto& cp : sys.couplings) {
        baths.push_back({cp.Q, discretize(cp.bath, t.discretization)});
        if (first.modes.empty()) first = baths.back().bath;
    }
    std::size_t J = 0;
    for (const auto& b : baths) J += b.bath.size();
    const auto H = build_hamiltonian(sys.H, baths, std::vector<int>(J, t.mode_dim));
    auto state = initial_vacuum(psi0, H.space());
    YAML::Node m = discretization_node(t.discretization, first);
    m["mode_dims"] = t.mode_dim;
    m["total_modes"] = static_cast<unsigned long>(J);
    m["total_dim"] = static_cast<unsigned long>(H.dim());
    m["krylov_dim"] = t.krylov.m;
    m["dt"] = t.krylov.dt;
    m["tol"] = t.krylov.tol;
    if (opt.verbose && opt.log) *opt.log << "tdse: " << J << " modes, dimension " << H.dim() << "\n";
    KrylovStats st;
    auto traj = propagate(H, state, times, t.krylov, &st);
    m["matvecs"] = static_cast<unsigned long>(st.matvecs);
    if (t.rate_correction) {
        const auto& tl = std::get<TwoLevelSystem>(*c.system);
        const Matrix U = two_level_eigenbasis(tl.E, tl.V);
        const double Omega = std::sqrt(tl.E * tl.E + 4.0 * tl.V * tl.V);
        auto corrected = rate_correction(to_basis(traj, U), c.bath.spec, Omega);
        traj = to_basis(corrected, U.adjoint());
        m["rate_correction"]["Omega"] = Omega;
        m["rate_correction"]["eta_cm"] = relaxation_rate(c.bath.spec, Omega);
    } else {
        m["rate_correction"] = false;
    }
    man["method"]["tdse"] = m;
    return traj;
}

inline Trajectory run_oracle(const ExperimentConfig& c, const DephasingOracleMethod& o, const SystemModel& sys,
                             const Matrix& rho0, const std::vector<double>& times, YAML::Node& man) {
    const double E = std::get<TwoLevelSystem>(*c.system).E;
    std::optional<DiscreteBath> db;
    YAML::Node m;
    if (o.discretization) {
        db = discretize(c.bath.spec, *o.discretization);
        m = discretization_node(*o.discretization, *db);
    } else {
        m["kind"] = "continuum";
    }
    Trajectory traj;
    for (double t : times) {
        const double f = db ? dephasing_coherence_discrete(*db, t) : dephasing_coherence_exact(c.bath.spec, t);
        Matrix rho = rho0;
        rho(0, 1) *= f * std::polar(1.0, -to_angular(E) * t);
        rho(1, 0) = std::conj(rho(0, 1));
        traj.push_back({t, rho, std::nullopt});
    }
    (void)sys;
    man["method"]["dephasing_oracle"] = m;
    return traj;
}

} // namespace detail

inline RunResult run(const ExperimentConfig& c, const RunOptions& opt = {}) {
    if (!c.system) throw ConfigError(c.source + ": run requires a system block");
    if (!c.run) throw ConfigError(c.source + ": run requires a run block");
    const auto t0 = std::chrono::steady_clock::now();
    const auto sys = build_system(c);
    const Vector psi0 = initial_vector(c, sys);
    const Matrix rho0 = psi0 * psi0.adjoint();
    const auto times = sample_times(*c.run);

    YAML::Node man;
    man["openbath_version"] = version;
    man["config"] = c.source;
    if (const auto* t = std::get_if<TwoLevelSystem>(&*c.system)) {
        man["system"]["two_level"]["E"] = t->E;
        man["system"]["two_level"]["V"] = t->V;
    } else {
        man["system"]["fmo"]["sites"] = 7;
    }
    man["bath"] = detail::bath_node(c.bath);
    man["run"]["t_end"] = c.run->t_end;
    man["run"]["sample_dt"] = c.run->sample_dt;
    man["run"]["samples"] = static_cast<unsigned long>(times.size());
    man["run"]["rtol"] = c.run->rtol;
    man["run"]["atol"] = c.run->atol;
    {
        InitialState s = c.run->initial.value_or(std::holds_alternative<FmoSystem>(*c.system)
                                                     ? InitialState{InitialKind::Site, 1}
                                                     : InitialState{});
        if (s.kind == InitialKind::Site)
            man["run"]["initial"]["site"] = s.site;
        else
            man["run"]["initial"] = to_string(s.kind);
    }
    man["output"]["basis"] = c.output.basis == ObservableBasis::Site ? "site" : "eigen";
    man["output"]["trajectory"] = c.output.trajectory;
    man["threads"] = opt.threads;

    Trajectory traj;
    if (const auto* h = std::get_if<HeomMethod>(&c.method))
        traj = detail::run_heom(c, *h, sys, rho0, times, opt, man);
    else if (const auto* t = std::get_if<TdseMethod>(&c.method))
        traj = detail::run_tdse(c, *t, sys, psi0, times, opt, man);
    else
        traj = detail::run_oracle(c, std::get<DephasingOracleMethod>(c.method), sys, rho0, times, man);

    traj = to_basis(traj, observable_basis(c, sys));
    const auto t1 = std::chrono::steady_clock::now();
    man["wall_time_s"] = std::chrono::duration<double>(t1 - t0).count();
    return {std::move(traj), man};
}

inline void write_manifest(std::ostream& os, const YAML::Node& man) {
    YAML::Emitter e;
    e.SetDoublePrecision(17);
    e << man;
    os << e.c_str() << '\n';
}

// Writes the trajectory CSV and manifest under out_dir; returns their paths.
inline std::pair<std::filesystem::path, std::filesystem::path> write_run(const RunResult& r, const ExperimentConfig& c,
                                                                         const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);
    const auto tp = out_dir / c.output.trajectory;
    const auto mp = out_dir / c.output.manifest;
    std::ofstream t(tp);
    if (!t) throw DomainError("cannot write " + tp.string());
    write_trajectory_csv(t, r.trajectory);
    std::ofstream m(mp);
    if (!m) throw DomainError("cannot write " + mp.string());
    write_manifest(m, r.manifest);
    return {tp, mp};
}

// --- spectrum -------------------------------------------------------------

// Fourier transform of sum_k c_k exp(gamma_k t) (t > 0, Hermitian extension),
// on the cm^-1 axis: (a/pi) Re sum_k -c_k / (gamma_k + i a w).
inline double reconstructed_spectrum(const FeatureSet& fs, double omega) {
    const double a = to_angular(1.0);
    cplx s = 0.0;
    for (const auto& f : fs.features) s -= f.c / (f.gamma + cplx(0.0, a * omega));
    return a / std::numbers::pi * s.real();
}

// Columns: omega_cm, exact, then reconstructed (heom) or discretized (tdse,
// discretized dephasing oracle).
inline void emit_spectrum(std::ostream& os, const ExperimentConfig& c) {
    if (!c.spectrum) throw ConfigError(c.source + ": spectrum requires a spectrum block");
    std::optional<FeatureSet> fs;
    std::optional<DiscreteBath> db;
    if (std::holds_alternative<HeomMethod>(c.method))
        fs = resolve_features(c);
    else if (std::holds_alternative<TdseMethod>(c.method) ||
             std::get<DephasingOracleMethod>(c.method).discretization)
        db = resolve_discrete_bath(c);
    os << "omega_cm,exact";
    if (fs) os << ",reconstructed";
    if (db) os << ",discretized";
    os << '\n';
    for (double w : c.spectrum->grid) {
        os << format_number(w) << ',' << format_number(effective_spectrum(c.bath.spec, w));
        if (fs) os << ',' << format_number(reconstructed_spectrum(*fs, w));
        if (db) os << ',' << format_number(windowed_spectrum(*db, c.spectrum->sigma, w));
        os << '\n';
    }
}

} // namespace openbath
