#include <sstream>
#include <gtest/gtest.h>
#include <gsam/io/csv.hpp>
#include <gsam/io/json.hpp>
#include "helpers.hpp"

namespace gsam {
namespace {

io::CsvTable parse(const std::string& text)
{
    std::istringstream in(text);
    return io::read_csv(in);
}

std::size_t error_line(const std::string& text)
{
    try {
        parse(text);
    } catch (const io::CsvError& e) {
        return e.line();
    }
    return 0;
}

TEST(Csv, ReadsHeaderAndValues)
{
    const auto t = parse("\xEF\xBB\xBFy, a,\"b,c\"\r\n1,2,3\n\n-4.5e1, +6 ,7\n");
    ASSERT_EQ(t.header, (std::vector<std::string>{"y", "a", "b,c"}));
    ASSERT_EQ(t.values.rows(), 2);
    EXPECT_EQ(t.values(1, 0), -45.0);
    EXPECT_EQ(t.values(1, 1), 6.0);
    EXPECT_EQ(t.column("b,c"), 2);
    EXPECT_THROW(t.column("z"), ArgumentError);
}

TEST(Csv, ErrorsCarryLineNumbers)
{
    EXPECT_EQ(error_line("y,a\n1,2\n3\n"), 3u);
    EXPECT_EQ(error_line("y,a\n1,2\n\n3,x\n"), 4u);
    EXPECT_EQ(error_line("y,a\n1,\"2\n"), 2u);
    EXPECT_EQ(error_line("y,y\n1,2\n"), 1u);
    EXPECT_THROW(parse(""), io::CsvError);
    EXPECT_THROW(parse("y,a\n1,inf\n"), io::CsvError);
    try {
        parse("y,a\n1,2\n5,bad\n");
        FAIL();
    } catch (const io::CsvError& e) {
        EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
        EXPECT_NE(std::string(e.what()).find("'a'"), std::string::npos);
    }
}

TEST(Csv, MissingValuesAreRejected)
{
    for (const char* missing : {"", "NA", "NaN", " "}) {
        const std::string text = std::string("y,a\n1,2\n3,") + missing + "\n";
        try {
            parse(text);
            FAIL() << "accepted '" << missing << "'";
        } catch (const io::CsvError& e) {
            EXPECT_EQ(e.line(), 3u);
            EXPECT_NE(std::string(e.what()).find("missing"), std::string::npos);
        }
    }
}

TEST(Csv, DatasetAndWriteRoundTrip)
{
    const auto t = parse("a,y,b\n0.1,1,2\n0.3,0,5\n");
    const Dataset d = io::to_dataset(t, "y");
    EXPECT_EQ(d.feature_names, (std::vector<std::string>{"a", "b"}));
    EXPECT_EQ(d.y, Vector::LinSpaced(2, 1.0, 0.0));
    EXPECT_EQ(d.x(1, 1), 5.0);
    EXPECT_EQ(io::select_columns(t, {"b", "a"})(0, 1), 0.1);
    EXPECT_THROW(io::to_dataset(parse("y\n1\n"), "y"), ArgumentError);

    std::mt19937_64 rng(3);
    const Matrix m = Matrix::NullaryExpr(5, 3, [&] { return testing::random_vector(rng, 1, -1e3, 1e3)(0) / 7.0; });
    std::ostringstream out;
    io::write_csv(out, {"x", "odd,name", "q\"uote"}, m);
    const auto back = parse(out.str());
    EXPECT_EQ(back.header, (std::vector<std::string>{"x", "odd,name", "q\"uote"}));
    EXPECT_EQ(back.values, m);
}

AdditiveModel fitted_model(const PenaltySpec& spec)
{
    const Dataset d = testing::signal_data(40, 3, 7);
    FitOptions o;
    o.omega = 0.3;
    AdditiveModel m = fit(d, LossKind::gaussian, spec, 0.05, o);
    m.components[1].interp = Interp::piecewise_constant;
    return m;
}

void expect_same_model(const AdditiveModel& a, const AdditiveModel& b)
{
    EXPECT_EQ(a.intercept, b.intercept);
    EXPECT_EQ(a.lambda, b.lambda);
    EXPECT_EQ(a.omega, b.omega);
    EXPECT_EQ(a.loss, b.loss);
    EXPECT_EQ(a.penalty.index(), b.penalty.index());
    EXPECT_EQ(a.diagnostics.iterations, b.diagnostics.iterations);
    EXPECT_EQ(a.diagnostics.objective, b.diagnostics.objective);
    ASSERT_EQ(a.p(), b.p());
    for (Index j = 0; j < a.p(); ++j) {
        EXPECT_EQ(a.components[j].knots, b.components[j].knots);
        EXPECT_EQ(a.components[j].values, b.components[j].values);
        EXPECT_EQ(a.components[j].interp, b.components[j].interp);
    }
}

TEST(Json, ModelRoundTripIsBitExact)
{
    for (const PenaltySpec& spec : std::vector<PenaltySpec>{TrendFilter{2}, SobolevSpline{true}, BasisSubspace{4, BasisFamily::cubic_spline},
                                                            Isotonic{false}}) {
        const AdditiveModel m = fitted_model(spec);
        const std::string text = io::model_to_json(m, {"a", "b", "c"}).dump();
        const auto doc = io::model_from_json(io::Json::parse(text));
        expect_same_model(m, doc.model);
        EXPECT_EQ(doc.feature_names, (std::vector<std::string>{"a", "b", "c"}));
        EXPECT_EQ(io::model_to_json(doc.model, doc.feature_names).dump(), text);
        EXPECT_EQ(to_string(doc.model.penalty), to_string(spec));
    }
}

TEST(Json, PenaltyRoundTrip)
{
    Matrix d(2, 3);
    d << 1, -1, 0, 0, 1, -1;
    const PenaltySpec spec = MatrixSeminorm{d, 1.0};
    const PenaltySpec back = io::penalty_from_json(io::Json::parse(io::penalty_to_json(spec).dump()));
    EXPECT_EQ(std::get<MatrixSeminorm>(back).d, d);
    EXPECT_EQ(std::get<MatrixSeminorm>(back).q, 1.0);
    EXPECT_THROW(io::penalty_from_json(io::Json{{"kind", "wavelet"}}), ArgumentError);
    EXPECT_THROW(io::penalty_from_json(io::Json{{"kind", "trend_filter"}}), ArgumentError);
}

TEST(Json, SchemaVersionIsChecked)
{
    io::Json j = io::model_to_json(fitted_model(TrendFilter{0}));
    EXPECT_EQ(j.at("schema_version").get<int>(), io::schema_version);
    EXPECT_EQ(j.at("type").get<std::string>(), "gsam_model");
    j["schema_version"] = io::schema_version + 1;
    EXPECT_THROW(io::model_from_json(j), ArgumentError);
    j.erase("schema_version");
    EXPECT_THROW(io::model_from_json(j), ArgumentError);
    io::Json path = io::path_to_json(PathResult{});
    EXPECT_THROW(io::model_from_json(path), ArgumentError);
}

TEST(Json, PathRoundTrip)
{
    const Dataset d = testing::signal_data(50, 3, 8);
    const auto grid = lambda_grid(d, LossKind::gaussian, TrendFilter{0}, 5, 0.05);
    CvOptions cv;
    cv.k = 3;
    const PathResult p = kfold_cv(d, TrendFilter{0}, LossKind::gaussian, grid, cv);
    const std::string text = io::path_to_json(p).dump();
    const PathResult back = io::path_from_json(io::Json::parse(text));
    EXPECT_EQ(back.lambdas, p.lambdas);
    EXPECT_EQ(back.cv_mean, p.cv_mean);
    EXPECT_EQ(back.cv_se, p.cv_se);
    EXPECT_EQ(back.selected, p.selected);
    EXPECT_EQ(back.selected_lambda_1se, p.selected_lambda_1se);
    ASSERT_EQ(back.models.size(), p.models.size());
    for (std::size_t k = 0; k < p.models.size(); ++k) expect_same_model(p.models[k], back.models[k]);
    EXPECT_EQ(io::path_to_json(back).dump(), text);
}

TEST(Json, RejectsMalformedComponents)
{
    io::Json j = io::model_to_json(fitted_model(TrendFilter{0}));
    j["components"][0]["values"].push_back(1.0);
    EXPECT_THROW(io::model_from_json(j), ArgumentError);
    j = io::model_to_json(fitted_model(TrendFilter{0}));
    j["components"][0]["knots"] = io::Json::array({1.0, 0.5});
    j["components"][0]["values"] = io::Json::array({1.0, 0.5});
    EXPECT_THROW(io::model_from_json(j), ArgumentError);
}

} // namespace
} // namespace gsam
