#pragma once
#include <string>
#include <vector>
#include <json.hpp>
#include <gsam/error.hpp>
#include <gsam/model.hpp>
#include <gsam/path_cv.hpp>

namespace gsam::io {

using Json = nlohmann::json;

inline constexpr int schema_version = 1;

namespace detail {

inline Json to_json(const Vector& v) { return Json(std::vector<double>(v.data(), v.data() + v.size())); }

inline Vector vector_from(const Json& j, const char* what)
{
    if (!j.is_array()) throw ArgumentError(std::string(what) + " must be an array");
    Vector v(static_cast<Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number()) throw ArgumentError(std::string(what) + " must contain numbers");
        v(static_cast<Index>(i)) = j[i].get<double>();
    }
    return v;
}

inline const Json& field(const Json& j, const char* key)
{
    if (!j.is_object() || !j.contains(key)) throw ArgumentError(std::string("missing field '") + key + "'");
    return j.at(key);
}

inline void check_schema(const Json& j, const char* type)
{
    const int version = field(j, "schema_version").get<int>();
    if (version != schema_version) {
        throw ArgumentError("unsupported schema_version " + std::to_string(version) + " (expected "
                            + std::to_string(schema_version) + ")");
    }
    if (field(j, "type").get<std::string>() != type) throw ArgumentError(std::string("document is not a ") + type);
}

} // namespace detail

inline std::string to_string(Interp interp)
{
    return interp == Interp::piecewise_constant ? "piecewise_constant" : "piecewise_linear";
}

inline Interp parse_interp(const std::string& name)
{
    if (name == "piecewise_constant") return Interp::piecewise_constant;
    if (name == "piecewise_linear") return Interp::piecewise_linear;
    throw ArgumentError("unknown interpolation '" + name + "'");
}

inline Json penalty_to_json(const PenaltySpec& spec)
{
    if (const auto* tf = std::get_if<TrendFilter>(&spec)) return {{"kind", "trend_filter"}, {"order", tf->order}};
    if (const auto* s = std::get_if<SobolevSpline>(&spec)) return {{"kind", "sobolev"}, {"squared", s->squared}};
    if (const auto* b = std::get_if<BasisSubspace>(&spec)) {
        return {{"kind", "basis"},
                {"dim", b->dim},
                {"family", b->family == BasisFamily::cubic_spline ? "cubic_spline" : "polynomial"}};
    }
    if (const auto* iso = std::get_if<Isotonic>(&spec)) return {{"kind", "isotonic"}, {"increasing", iso->increasing}};
    const auto& m = std::get<MatrixSeminorm>(spec);
    Json rows = Json::array();
    for (Index i = 0; i < m.d.rows(); ++i) rows.push_back(detail::to_json(m.d.row(i).transpose()));
    return {{"kind", "matrix"}, {"q", m.q}, {"cols", m.d.cols()}, {"d", rows}};
}

inline PenaltySpec penalty_from_json(const Json& j)
{
    const auto kind = detail::field(j, "kind").get<std::string>();
    PenaltySpec spec;
    if (kind == "trend_filter") {
        spec = TrendFilter{detail::field(j, "order").get<int>()};
    } else if (kind == "sobolev") {
        spec = SobolevSpline{detail::field(j, "squared").get<bool>()};
    } else if (kind == "basis") {
        const auto fam = detail::field(j, "family").get<std::string>();
        if (fam != "polynomial" && fam != "cubic_spline") throw ArgumentError("unknown basis family '" + fam + "'");
        spec = BasisSubspace{detail::field(j, "dim").get<int>(),
                             fam == "cubic_spline" ? BasisFamily::cubic_spline : BasisFamily::polynomial};
    } else if (kind == "isotonic") {
        spec = Isotonic{detail::field(j, "increasing").get<bool>()};
    } else if (kind == "matrix") {
        const auto& rows = detail::field(j, "d");
        const auto cols = detail::field(j, "cols").get<Index>();
        Matrix d(static_cast<Index>(rows.size()), cols);
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const Vector r = detail::vector_from(rows[i], "matrix row");
            if (r.size() != cols) throw ArgumentError("matrix row has the wrong length");
            d.row(static_cast<Index>(i)) = r.transpose();
        }
        spec = MatrixSeminorm{std::move(d), detail::field(j, "q").get<double>()};
    } else {
        throw ArgumentError("unknown penalty kind '" + kind + "'");
    }
    validate(spec);
    return spec;
}

/// Model fields only, without the schema envelope (used inside path documents).
inline Json model_body(const AdditiveModel& m, const std::vector<std::string>& names = {})
{
    Json comps = Json::array();
    for (Index j = 0; j < m.p(); ++j) {
        const auto& c = m.components[j];
        Json cj = {{"knots", detail::to_json(c.knots)}, {"values", detail::to_json(c.values)}, {"interp", to_string(c.interp)}};
        if (static_cast<Index>(names.size()) == m.p()) cj["name"] = names[j];
        comps.push_back(std::move(cj));
    }
    Json out = {{"intercept", m.intercept},
                {"lambda", m.lambda},
                {"omega", m.omega ? Json(*m.omega) : Json(nullptr)},
                {"loss", to_string(m.loss)},
                {"penalty", penalty_to_json(m.penalty)},
                {"components", std::move(comps)},
                {"diagnostics",
                 {{"iterations", m.diagnostics.iterations},
                  {"objective", m.diagnostics.objective},
                  {"converged", m.diagnostics.converged}}}};
    return out;
}

inline Json model_to_json(const AdditiveModel& m, const std::vector<std::string>& names = {})
{
    Json out = {{"schema_version", schema_version}, {"type", "gsam_model"}};
    out.update(model_body(m, names));
    return out;
}

struct ModelDocument
{
    AdditiveModel model;
    /// Component names when the document carries them, else empty.
    std::vector<std::string> feature_names;
};

inline ModelDocument model_from_body(const Json& j)
{
    ModelDocument doc;
    AdditiveModel& m = doc.model;
    m.intercept = detail::field(j, "intercept").get<double>();
    m.lambda = detail::field(j, "lambda").get<double>();
    if (const auto& om = detail::field(j, "omega"); !om.is_null()) m.omega = om.get<double>();
    m.loss = parse_loss(detail::field(j, "loss").get<std::string>());
    m.penalty = penalty_from_json(detail::field(j, "penalty"));
    const auto& comps = detail::field(j, "components");
    bool named = true;
    for (const auto& cj : comps) {
        ComponentFit c;
        c.knots = detail::vector_from(detail::field(cj, "knots"), "knots");
        c.values = detail::vector_from(detail::field(cj, "values"), "values");
        c.interp = parse_interp(detail::field(cj, "interp").get<std::string>());
        if (c.knots.size() != c.values.size()) throw ArgumentError("component knots and values differ in length");
        gsam::detail::check_knots(c.knots);
        m.components.push_back(std::move(c));
        if (cj.contains("name")) doc.feature_names.push_back(cj.at("name").get<std::string>());
        else named = false;
    }
    if (!named) doc.feature_names.clear();
    if (j.contains("diagnostics")) {
        const auto& d = j.at("diagnostics");
        m.diagnostics = {d.at("iterations").get<int>(), d.at("objective").get<double>(), d.at("converged").get<bool>()};
    }
    return doc;
}

inline ModelDocument model_from_json(const Json& j)
{
    detail::check_schema(j, "gsam_model");
    return model_from_body(j);
}

inline Json path_to_json(const PathResult& path, const std::vector<std::string>& names = {})
{
    Json models = Json::array();
    for (const auto& m : path.models) models.push_back(model_body(m, names));
    auto opt = [](const auto& v) { return v ? Json(*v) : Json(nullptr); };
    return {{"schema_version", schema_version},
            {"type", "gsam_path"},
            {"lambdas", path.lambdas},
            {"active_sizes", path.active_sizes()},
            {"cv_mean", path.cv_mean},
            {"cv_se", path.cv_se},
            {"selected_lambda_min", opt(path.selected_lambda_min)},
            {"selected_lambda_1se", opt(path.selected_lambda_1se)},
            {"selected_index", opt(path.selected)},
            {"failure", opt(path.failure)},
            {"models", std::move(models)}};
}

inline PathResult path_from_json(const Json& j)
{
    detail::check_schema(j, "gsam_path");
    PathResult p;
    p.lambdas = detail::field(j, "lambdas").get<std::vector<double>>();
    p.cv_mean = detail::field(j, "cv_mean").get<std::vector<double>>();
    p.cv_se = detail::field(j, "cv_se").get<std::vector<double>>();
    if (const auto& v = detail::field(j, "selected_lambda_min"); !v.is_null()) p.selected_lambda_min = v.get<double>();
    if (const auto& v = detail::field(j, "selected_lambda_1se"); !v.is_null()) p.selected_lambda_1se = v.get<double>();
    if (const auto& v = detail::field(j, "selected_index"); !v.is_null()) p.selected = v.get<std::size_t>();
    if (const auto& v = detail::field(j, "failure"); !v.is_null()) p.failure = v.get<std::string>();
    for (const auto& mj : detail::field(j, "models")) p.models.push_back(model_from_body(mj).model);
    return p;
}

} // namespace gsam::io
