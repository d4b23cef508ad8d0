#include "afc/scenario.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace afc {

namespace {

using nlohmann::json;
using ordered = nlohmann::ordered_json;

constexpr int kSchemaVersion = 1;

[[noreturn]] void fail(const std::string& message) {
    throw std::runtime_error("scenario: " + message);
}

// Wraps one JSON object; every accessor marks its key as consumed and
// finish() rejects whatever was not consumed, so misspellings never pass
// silently.
class ObjectReader {
  public:
    ObjectReader(const json& node, std::string path) : node_(node), path_(std::move(path)) {
        if (!node_.is_object())
            fail("'" + path_ + "' must be an object");
    }

    std::string where(const char* key) const {
        return path_.empty() ? std::string(key) : path_ + "." + key;
    }

    bool has(const char* key) const { return node_.contains(key); }

    double number(const char* key, double fallback) {
        if (!has(key))
            return fallback;
        return require_number(key);
    }

    double require_number(const char* key) {
        mark(key);
        const json& v = at(key);
        if (!v.is_number())
            fail("'" + where(key) + "' must be a number");
        return v.get<double>();
    }

    std::uint64_t integer(const char* key, std::uint64_t fallback) {
        if (!has(key))
            return fallback;
        return require_integer(key);
    }

    std::uint64_t require_integer(const char* key) {
        mark(key);
        const json& v = at(key);
        if (!v.is_number_integer() || v.get<long long>() < 0)
            fail("'" + where(key) + "' must be a non-negative integer");
        return v.get<std::uint64_t>();
    }

    bool boolean(const char* key, bool fallback) {
        if (!has(key))
            return fallback;
        mark(key);
        const json& v = at(key);
        if (!v.is_boolean())
            fail("'" + where(key) + "' must be true or false");
        return v.get<bool>();
    }

    std::string text(const char* key, const std::string& fallback) {
        if (!has(key))
            return fallback;
        return require_text(key);
    }

    std::string require_text(const char* key) {
        mark(key);
        const json& v = at(key);
        if (!v.is_string())
            fail("'" + where(key) + "' must be a string");
        return v.get<std::string>();
    }

    std::vector<double> require_numbers(const char* key) {
        mark(key);
        const json& v = at(key);
        if (!v.is_array() || v.empty())
            fail("'" + where(key) + "' must be a non-empty array of numbers");
        std::vector<double> out;
        for (const json& item : v) {
            if (!item.is_number())
                fail("'" + where(key) + "' must contain only numbers");
            out.push_back(item.get<double>());
        }
        return out;
    }

    std::vector<double> numbers(const char* key, std::vector<double> fallback) {
        if (!has(key))
            return fallback;
        return require_numbers(key);
    }

    const json& require_child(const char* key) {
        mark(key);
        return at(key);
    }

    const json* child(const char* key) {
        if (!has(key))
            return nullptr;
        mark(key);
        return &at(key);
    }

    void finish() const {
        for (const auto& item : node_.items())
            if (consumed_.find(item.key()) == consumed_.end())
                fail("unknown key '" + where(item.key().c_str()) + "'");
    }

  private:
    const json& at(const char* key) const { return node_.at(key); }
    void mark(const char* key) {
        if (!has(key))
            fail("missing required key '" + where(key) + "'");
        consumed_.insert(key);
    }

    const json& node_;
    std::string path_;
    std::set<std::string> consumed_;
};

// Unit suffixes used by the schema.
constexpr double kNs = 1e-9;
constexpr double kUs = 1e-6;
constexpr double kMs = 1e-3;
constexpr double kKhz = 1e3;
constexpr double kMhz = 1e6;
constexpr double kGhz = 1e9;
constexpr double kDeg = std::numbers::pi / 180.0;

std::vector<double> scaled(std::vector<double> values, double unit) {
    for (double& v : values)
        v *= unit;
    return values;
}

ExperimentKind parse_kind(const std::string& text) {
    if (text == "single_mode")
        return ExperimentKind::single_mode;
    if (text == "linearity")
        return ExperimentKind::linearity;
    if (text == "decay")
        return ExperimentKind::decay;
    if (text == "multimode")
        return ExperimentKind::multimode;
    if (text == "interference")
        return ExperimentKind::interference;
    fail("'experiment' must be one of single_mode, linearity, decay, multimode, interference "
         "(got '" + text + "')");
}

ToothShape parse_shape(const std::string& text) {
    if (text == "lorentzian")
        return ToothShape::lorentzian;
    if (text == "gaussian")
        return ToothShape::gaussian;
    if (text == "square")
        return ToothShape::square;
    fail("'spectrum.comb.shape' must be lorentzian, gaussian or square (got '" + text + "')");
}

std::string shape_name(ToothShape shape) {
    switch (shape) {
        case ToothShape::lorentzian: return "lorentzian";
        case ToothShape::gaussian: return "gaussian";
        case ToothShape::square: return "square";
    }
    fail("invalid tooth shape value");
}

void parse_time_grid(const json& node, TimeGrid& grid) {
    ObjectReader r(node, "time_grid");
    grid.t0_s = r.number("start_ns", 0.0) * kNs;
    grid.dt_s = r.require_number("step_ns") * kNs;
    grid.n_samples = static_cast<std::size_t>(r.require_integer("samples"));
    r.finish();
}

void parse_frequency_grid(const json& node, FrequencyGrid& grid) {
    ObjectReader r(node, "frequency_grid");
    grid.span_hz = r.require_number("span_mhz") * kMhz;
    grid.n_points = static_cast<std::size_t>(r.require_integer("points"));
    r.finish();
}

void parse_material(const json& node, MaterialParams& m) {
    ObjectReader r(node, "material");
    m.t1_excited_s = r.number("t1_excited_us", m.t1_excited_s / kUs) * kUs;
    m.t2_optical_s = r.number("t2_optical_us", m.t2_optical_s / kUs) * kUs;
    m.tz_spin_s = r.number("tz_spin_ms", m.tz_spin_s / kMs) * kMs;
    m.inhom_fwhm_hz = r.number("inhom_fwhm_ghz", m.inhom_fwhm_hz / kGhz) * kGhz;
    m.d_max = r.number("d_max", m.d_max);
    m.branching_to_aux = r.number("branching_to_aux", m.branching_to_aux);
    m.shf_splitting_hz = r.number("shf_splitting_mhz", m.shf_splitting_hz / kMhz) * kMhz;
    m.shf_weight = r.number("shf_weight", m.shf_weight);
    r.finish();
}

void parse_comb(const json& node, CombParams& c) {
    ObjectReader r(node, "spectrum.comb");
    c.period_hz = r.number("period_mhz", 0.0) * kMhz;
    c.tooth_fwhm_hz = r.require_number("tooth_fwhm_mhz") * kMhz;
    c.shape = parse_shape(r.text("shape", "lorentzian"));
    c.d_peak = r.require_number("d_peak");
    c.d_background = r.number("d_background", 0.0);
    c.envelope_fwhm_hz = r.number("envelope_fwhm_mhz", 0.0) * kMhz;
    c.n_teeth = static_cast<std::size_t>(r.integer("n_teeth", 0));
    r.finish();
}

void parse_sequence(const json& node, PreparationSequence& s) {
    ObjectReader r(node, "spectrum.sequence");
    const json& pairs = r.require_child("pairs");
    if (!pairs.is_array() || pairs.empty())
        fail("'spectrum.sequence.pairs' must be a non-empty array");
    s.pairs.clear();
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        ObjectReader pr(pairs[i], "spectrum.sequence.pairs[" + std::to_string(i) + "]");
        PulsePair pp;
        pp.area_theta_rad = pr.require_number("area_deg") * kDeg;
        pp.tau_s_s = pr.require_number("tau_ns") * kNs;
        pp.pulse_fwhm_s = pr.number("pulse_fwhm_ns", pp.pulse_fwhm_s / kNs) * kNs;
        const double weight = pr.number("weight", 1.0);
        pr.finish();
        s.pairs.emplace_back(pp, weight);
    }
    s.n_repetitions = static_cast<std::size_t>(r.integer("repetitions", s.n_repetitions));
    s.pair_spacing_s = r.number("pair_spacing_us", s.pair_spacing_s / kUs) * kUs;
    s.wait_before_storage_s =
        r.number("wait_before_storage_us", s.wait_before_storage_s / kUs) * kUs;
    s.tooth_width_floor_fwhm_hz =
        r.number("tooth_width_floor_mhz", s.tooth_width_floor_fwhm_hz / kMhz) * kMhz;
    r.finish();
}

void parse_spectrum(const json& node, Scenario& sc) {
    ObjectReader r(node, "spectrum");
    const std::string source = r.require_text("source");
    if (source == "synthetic") {
        sc.base.source = SpectrumSource::synthetic;
        parse_comb(r.require_child("comb"), sc.base.comb);
    } else if (source == "prepared") {
        sc.base.source = SpectrumSource::prepared;
        parse_sequence(r.require_child("sequence"), sc.base.sequence);
    } else {
        fail("'spectrum.source' must be synthetic or prepared (got '" + source + "')");
    }
    r.finish();
}

void parse_input(const json& node, Scenario& sc) {
    ObjectReader r(node, "input");
    sc.base.pulse_center_s = r.number("pulse_center_ns", sc.base.pulse_center_s / kNs) * kNs;
    sc.base.pulse_fwhm_s = r.number("pulse_fwhm_ns", sc.base.pulse_fwhm_s / kNs) * kNs;
    sc.base.input_nbar = r.number("nbar", sc.base.input_nbar);
    r.finish();
}

void parse_detector(const json& node, DetectorModel& d) {
    ObjectReader r(node, "detector");
    d.eta_d = r.number("eta_d", d.eta_d);
    d.eta_t = r.number("eta_t", d.eta_t);
    d.dark_rate_hz = r.number("dark_rate_hz", d.dark_rate_hz);
    d.bin_width_s = r.number("bin_width_ns", d.bin_width_s / kNs) * kNs;
    d.dead_time_s = r.number("dead_time_ns", d.dead_time_s / kNs) * kNs;
    r.finish();
}

void parse_plan(const json& node, TrialPlan& p) {
    ObjectReader r(node, "plan");
    p.n_trials = static_cast<std::size_t>(r.integer("trials", p.n_trials));
    p.trial_rate_hz = r.number("trial_rate_khz", p.trial_rate_hz / kKhz) * kKhz;
    p.sequence_rate_hz = r.number("sequence_rate_hz", p.sequence_rate_hz);
    p.n_sequences = static_cast<std::size_t>(r.integer("sequences", p.n_sequences));
    r.finish();
}

void parse_analysis(const json& node, Scenario& sc) {
    ObjectReader r(node, "analysis");
    sc.base.echo_window_s = r.number("echo_window_ns", sc.base.echo_window_s / kNs) * kNs;
    sc.base.include_dispersion = r.boolean("include_dispersion", sc.base.include_dispersion);
    r.finish();
}

void parse_linearity(const json& node, Scenario& sc) {
    ObjectReader r(node, "linearity");
    sc.input_nbars = r.require_numbers("nbars");
    r.finish();
}

void parse_decay(const json& node, Scenario& sc) {
    ObjectReader r(node, "decay");
    sc.storage_times_s = scaled(r.require_numbers("storage_times_ns"), kNs);
    sc.equal_mean_depth = r.boolean("equal_mean_depth", sc.equal_mean_depth);
    sc.decay_with_detection = r.boolean("with_detection", sc.decay_with_detection);
    r.finish();
}

void parse_multimode(const json& node, Scenario& sc) {
    ObjectReader r(node, "multimode");
    sc.n_modes = static_cast<std::size_t>(r.integer("modes", sc.n_modes));
    sc.mode_spacing_s = r.require_number("mode_spacing_ns") * kNs;
    sc.mode_nbars = r.numbers("mode_nbars", {});
    sc.multimode_with_detection = r.boolean("with_detection", sc.multimode_with_detection);
    r.finish();
}

void parse_interference(const json& node, Scenario& sc) {
    ObjectReader r(node, "interference");
    sc.storage_a_s = r.number("storage_a_ns", sc.storage_a_s / kNs) * kNs;
    sc.storage_b_s = r.number("storage_b_ns", sc.storage_b_s / kNs) * kNs;
    sc.comb_finesse = r.number("comb_finesse", sc.comb_finesse);
    sc.grating_weight = r.number("grating_weight", sc.grating_weight);
    sc.auto_balance = r.boolean("auto_balance", sc.auto_balance);
    sc.phases_rad = scaled(r.require_numbers("phases_deg"), kDeg);
    sc.interference_with_detection =
        r.boolean("with_detection", sc.interference_with_detection);
    sc.qubit.tau_s = sc.storage_b_s - sc.storage_a_s;
    if (const json* q = r.child("qubit")) {
        ObjectReader qr(*q, "interference.qubit");
        sc.qubit.tau_s = qr.number("tau_ns", sc.qubit.tau_s / kNs) * kNs;
        sc.qubit.phi_rad = qr.number("phi_deg", sc.qubit.phi_rad / kDeg) * kDeg;
        sc.qubit.nbar_total = qr.number("nbar_total", sc.qubit.nbar_total);
        qr.finish();
    }
    r.finish();
}

}  // namespace

std::string to_string(ExperimentKind kind) {
    switch (kind) {
        case ExperimentKind::single_mode: return "single_mode";
        case ExperimentKind::linearity: return "linearity";
        case ExperimentKind::decay: return "decay";
        case ExperimentKind::multimode: return "multimode";
        case ExperimentKind::interference: return "interference";
    }
    fail("invalid experiment kind value");
}

Scenario parse_scenario_text(const std::string& json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& err) {
        fail(std::string("not valid JSON: ") + err.what());
    }
    ObjectReader r(doc, "");

    Scenario sc;
    sc.version = static_cast<int>(r.require_integer("version"));
    if (sc.version != kSchemaVersion)
        fail("unsupported 'version' " + std::to_string(sc.version) + " (expected " +
             std::to_string(kSchemaVersion) + ")");
    sc.name = r.require_text("name");
    sc.description = r.text("description", "");
    sc.kind = parse_kind(r.require_text("experiment"));
    sc.base.master_seed = r.integer("seed", sc.base.master_seed);

    parse_time_grid(r.require_child("time_grid"), sc.base.time_grid);
    parse_frequency_grid(r.require_child("frequency_grid"), sc.base.freq_grid);
    if (const json* node = r.child("material"))
        parse_material(*node, sc.base.material);
    parse_spectrum(r.require_child("spectrum"), sc);
    if (const json* node = r.child("input"))
        parse_input(*node, sc);
    if (const json* node = r.child("detector"))
        parse_detector(*node, sc.base.detector);
    if (const json* node = r.child("plan"))
        parse_plan(*node, sc.base.plan);
    if (const json* node = r.child("analysis"))
        parse_analysis(*node, sc);

    switch (sc.kind) {
        case ExperimentKind::single_mode:
            break;
        case ExperimentKind::linearity:
            parse_linearity(r.require_child("linearity"), sc);
            break;
        case ExperimentKind::decay:
            parse_decay(r.require_child("decay"), sc);
            break;
        case ExperimentKind::multimode:
            parse_multimode(r.require_child("multimode"), sc);
            break;
        case ExperimentKind::interference:
            parse_interference(r.require_child("interference"), sc);
            break;
    }
    r.finish();
    return sc;
}

Scenario load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        fail("cannot open scenario file '" + path + "'");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_scenario_text(buffer.str());
}

std::string resolved_scenario_json(const Scenario& sc) {
    ordered doc;
    doc["version"] = sc.version;
    doc["name"] = sc.name;
    doc["description"] = sc.description;
    doc["experiment"] = to_string(sc.kind);
    doc["seed"] = sc.base.master_seed;

    doc["time_grid"] = {{"start_ns", sc.base.time_grid.t0_s / kNs},
                        {"step_ns", sc.base.time_grid.dt_s / kNs},
                        {"samples", sc.base.time_grid.n_samples}};
    doc["frequency_grid"] = {{"span_mhz", sc.base.freq_grid.span_hz / kMhz},
                             {"points", sc.base.freq_grid.n_points}};

    const MaterialParams& m = sc.base.material;
    doc["material"] = {{"t1_excited_us", m.t1_excited_s / kUs},
                       {"t2_optical_us", m.t2_optical_s / kUs},
                       {"tz_spin_ms", m.tz_spin_s / kMs},
                       {"inhom_fwhm_ghz", m.inhom_fwhm_hz / kGhz},
                       {"d_max", m.d_max},
                       {"branching_to_aux", m.branching_to_aux},
                       {"shf_splitting_mhz", m.shf_splitting_hz / kMhz},
                       {"shf_weight", m.shf_weight}};

    if (sc.base.source == SpectrumSource::synthetic) {
        const CombParams& c = sc.base.comb;
        doc["spectrum"] = {{"source", "synthetic"},
                           {"comb",
                            {{"period_mhz", c.period_hz / kMhz},
                             {"tooth_fwhm_mhz", c.tooth_fwhm_hz / kMhz},
                             {"shape", shape_name(c.shape)},
                             {"d_peak", c.d_peak},
                             {"d_background", c.d_background},
                             {"envelope_fwhm_mhz", c.envelope_fwhm_hz / kMhz},
                             {"n_teeth", c.n_teeth}}}};
    } else {
        const PreparationSequence& s = sc.base.sequence;
        ordered pairs = ordered::array();
        for (const auto& [pair, weight] : s.pairs)
            pairs.push_back({{"area_deg", pair.area_theta_rad / kDeg},
                             {"tau_ns", pair.tau_s_s / kNs},
                             {"pulse_fwhm_ns", pair.pulse_fwhm_s / kNs},
                             {"weight", weight}});
        doc["spectrum"] = {
            {"source", "prepared"},
            {"sequence",
             {{"pairs", pairs},
              {"repetitions", s.n_repetitions},
              {"pair_spacing_us", s.pair_spacing_s / kUs},
              {"wait_before_storage_us", s.wait_before_storage_s / kUs},
              {"tooth_width_floor_mhz", s.tooth_width_floor_fwhm_hz / kMhz}}}};
    }

    doc["input"] = {{"pulse_center_ns", sc.base.pulse_center_s / kNs},
                    {"pulse_fwhm_ns", sc.base.pulse_fwhm_s / kNs},
                    {"nbar", sc.base.input_nbar}};
    const DetectorModel& d = sc.base.detector;
    doc["detector"] = {{"eta_d", d.eta_d},
                       {"eta_t", d.eta_t},
                       {"dark_rate_hz", d.dark_rate_hz},
                       {"bin_width_ns", d.bin_width_s / kNs},
                       {"dead_time_ns", d.dead_time_s / kNs}};
    const TrialPlan& p = sc.base.plan;
    doc["plan"] = {{"trials", p.n_trials},
                   {"trial_rate_khz", p.trial_rate_hz / kKhz},
                   {"sequence_rate_hz", p.sequence_rate_hz},
                   {"sequences", p.n_sequences}};
    doc["analysis"] = {{"echo_window_ns", sc.base.echo_window_s / kNs},
                       {"include_dispersion", sc.base.include_dispersion}};

    auto as_array = [](const std::vector<double>& values, double unit) {
        ordered arr = ordered::array();
        for (double v : values)
            arr.push_back(v / unit);
        return arr;
    };
    switch (sc.kind) {
        case ExperimentKind::single_mode:
            break;
        case ExperimentKind::linearity:
            doc["linearity"] = {{"nbars", as_array(sc.input_nbars, 1.0)}};
            break;
        case ExperimentKind::decay:
            doc["decay"] = {{"storage_times_ns", as_array(sc.storage_times_s, kNs)},
                            {"equal_mean_depth", sc.equal_mean_depth},
                            {"with_detection", sc.decay_with_detection}};
            break;
        case ExperimentKind::multimode:
            doc["multimode"] = {{"modes", sc.n_modes},
                                {"mode_spacing_ns", sc.mode_spacing_s / kNs},
                                {"with_detection", sc.multimode_with_detection}};
            if (!sc.mode_nbars.empty())
                doc["multimode"]["mode_nbars"] = as_array(sc.mode_nbars, 1.0);
            break;
        case ExperimentKind::interference:
            doc["interference"] = {{"storage_a_ns", sc.storage_a_s / kNs},
                                   {"storage_b_ns", sc.storage_b_s / kNs},
                                   {"comb_finesse", sc.comb_finesse},
                                   {"grating_weight", sc.grating_weight},
                                   {"auto_balance", sc.auto_balance},
                                   {"phases_deg", as_array(sc.phases_rad, kDeg)},
                                   {"with_detection", sc.interference_with_detection},
                                   {"qubit",
                                    {{"tau_ns", sc.qubit.tau_s / kNs},
                                     {"phi_deg", sc.qubit.phi_rad / kDeg},
                                     {"nbar_total", sc.qubit.nbar_total}}}};
            break;
    }
    return doc.dump(2) + "\n";
}

}  // namespace afc
