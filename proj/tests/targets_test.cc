#include "scissor/targets.h"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>

#include "gtest/gtest.h"

namespace scissor::targets {
namespace {

constexpr double kPi = std::numbers::pi;

TargetCurve Circle(double r, Point center, int n) {
  TargetCurve c;
  c.closed = true;
  for (int i = 0; i < n; ++i) {
    const double t = 2 * kPi * i / n;
    c.points.push_back(center + Point{r * std::cos(t), r * std::sin(t)});
  }
  return c;
}

double MaxAbs(const std::vector<double>& v) {
  double m = 0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

TEST(NormalizeBbox, UnitBoxUnchanged) {
  TargetCurve c{{{0, 0}, {1, 0}, {1, 1}, {0, 1}}, true};
  const TargetCurve n = normalize_bbox(c);
  for (size_t i = 0; i < c.points.size(); ++i) {
    EXPECT_NEAR(n.points[i].x, c.points[i].x, 1e-15);
    EXPECT_NEAR(n.points[i].y, c.points[i].y, 1e-15);
  }
}

TEST(NormalizeBbox, CircleGetsUnitDiameter) {
  const TargetCurve n = normalize_bbox(Circle(5, {12, -7}, 400));
  double x0 = 1e9, x1 = -1e9, y0 = 1e9, y1 = -1e9;
  for (const Point& p : n.points) {
    x0 = std::min(x0, p.x);
    x1 = std::max(x1, p.x);
    y0 = std::min(y0, p.y);
    y1 = std::max(y1, p.y);
  }
  EXPECT_NEAR(x0, 0.0, 1e-12);
  EXPECT_NEAR(x1, 1.0, 1e-12);
  EXPECT_NEAR(y1 - y0, 1.0, 1e-4);
}

TEST(NormalizeBbox, AspectPreserved) {
  TargetCurve e;
  e.closed = true;
  for (int i = 0; i < 360; ++i) {
    const double t = 2 * kPi * i / 360;
    e.points.push_back({4 * std::cos(t) + 3, 2 * std::sin(t)});
  }
  const TargetCurve n = normalize_bbox(e);
  double x0 = 1e9, x1 = -1e9, y0 = 1e9, y1 = -1e9;
  for (const Point& p : n.points) {
    x0 = std::min(x0, p.x);
    x1 = std::max(x1, p.x);
    y0 = std::min(y0, p.y);
    y1 = std::max(y1, p.y);
  }
  EXPECT_NEAR(x1 - x0, 1.0, 1e-12);
  EXPECT_NEAR(y1 - y0, 0.5, 1e-12);
  EXPECT_NEAR(0.5 * (y0 + y1), 0.5, 1e-12);
}

TEST(NormalizeBbox, DegenerateThrows) {
  TargetCurve c{{{1, 1}, {1, 1}, {1, 1}, {1, 1}}, false};
  EXPECT_THROW(normalize_bbox(c), TargetError);
}

TEST(ArcLength, CircleCircumference) {
  const ArcLengthProfile p = arclength_parameterize(Circle(1, {0, 0}, 1000), 100);
  EXPECT_NEAR(p.total_length, 2 * kPi, 1e-4);
  ASSERT_EQ(p.s_grid.size(), 101u);
  ASSERT_EQ(p.nodes.size(), 101u);
  EXPECT_NEAR(p.nodes.back().x, p.nodes.front().x, 1e-15);
  // nodes stay on the circle
  for (const Point& q : p.nodes) EXPECT_NEAR(norm(q), 1.0, 1e-9);
}

TEST(ArcLength, StraightSegment) {
  TargetCurve c;
  for (int i = 0; i <= 30; ++i) c.points.push_back({0.1 * i, 0});
  const ArcLengthProfile p = arclength_parameterize(c, 3);
  EXPECT_NEAR(p.total_length, 3.0, 1e-12);
  for (int j = 0; j <= 3; ++j) {
    EXPECT_NEAR(p.s_grid[j], j, 1e-12);
    EXPECT_NEAR(p.nodes[j].x, j, 1e-12);
    EXPECT_NEAR(p.nodes[j].y, 0, 1e-12);
  }
  EXPECT_NEAR(p.initial_tangent, 0.0, 1e-12);
}

TEST(ArcLength, SineCurvatureTargetHasUniformChords) {
  const ArcLengthProfile p = arclength_parameterize(analytic_target("sine"), 200);
  const double ds = p.spacing();
  for (size_t j = 1; j < p.nodes.size(); ++j) {
    EXPECT_NEAR(norm(p.nodes[j] - p.nodes[j - 1]), ds, 1e-3 * ds);
  }
  // the analytic curve has unit speed, so the length is the nominal L
  EXPECT_NEAR(p.total_length, 3.0, 1e-8);
}

TEST(ArcLength, UniformGridAndChordConsistency) {
  const ArcLengthProfile p = arclength_parameterize(analytic_target("spiral"), 3000);
  const double ds = p.total_length / 3000;
  double chords = 0;
  for (size_t j = 0; j < p.s_grid.size(); ++j) {
    EXPECT_NEAR(p.s_grid[j], j * ds, 1e-9 * p.total_length);
    if (j > 0) chords += norm(p.nodes[j] - p.nodes[j - 1]);
  }
  EXPECT_NEAR(chords, p.total_length, 1e-6 * p.total_length);
}

TEST(ArcLength, Errors) {
  TargetCurve few{{{0, 0}, {1, 0}, {2, 0}}, false};
  EXPECT_THROW(arclength_parameterize(few, 10), TargetError);
  TargetCurve dup{{{0, 0}, {1, 0}, {1, 0}, {2, 0}}, false};
  EXPECT_THROW(arclength_parameterize(dup, 10), TargetError);
  EXPECT_THROW(arclength_parameterize(analytic_target("line"), 2), TargetError);
}

TEST(Curvature, CircleIsConstant) {
  for (int m : {50, 100, 400}) {
    const ArcLengthProfile p = build_profile(Circle(2.5, {1, 1}, 1000), m);
    for (double k : p.kappa) EXPECT_NEAR(k, 0.4, 0.004) << "m = " << m;
  }
  // clockwise traversal flips the sign
  TargetCurve cw = Circle(2.5, {0, 0}, 1000);
  std::reverse(cw.points.begin(), cw.points.end());
  for (double k : build_profile(cw, 80).kappa) EXPECT_NEAR(k, -0.4, 0.004);
}

TEST(Curvature, LineIsZero) {
  const ArcLengthProfile p = build_profile(analytic_target("line", {{"L", 2}}), 60);
  EXPECT_LT(MaxAbs(p.kappa), 1e-9);
}

TEST(Curvature, ParabolaAtVertex) {
  TargetCurve c;
  for (int i = -500; i <= 500; ++i) {
    const double x = i * 0.002;
    c.points.push_back({x, 0.5 * x * x});
  }
  const ArcLengthProfile p = build_profile(c, 400, 0.0);
  // the vertex is the midpoint by symmetry
  EXPECT_NEAR(p.kappa[200], 1.0, 1e-4);
  EXPECT_NEAR(p.nodes[200].x, 0.0, 1e-9);
}

TEST(Curvature, TooFewNodesThrows) {
  ArcLengthProfile p = arclength_parameterize(analytic_target("line"), 3);
  EXPECT_THROW(curvature_profile(p, 0.0), TargetError);
}

// Oracle for the spiral: integrate theta' = kappa = c s with classical RK4 on
// the coupled (x, y, theta) system, then measure curvature from the target's
// nodes against c s.
TEST(Curvature, SpiralMatchesLinearLaw) {
  const double c = 1.3, length = 3.0;
  TargetCurve oracle;
  double x = 0, y = 0, th = 0;
  const int steps = 4000;
  const double h = length / steps;
  auto f = [&](double s, double t) {
    (void)t;
    return c * s;
  };
  oracle.points.push_back({x, y});
  for (int i = 0; i < steps; ++i) {
    const double s = i * h;
    const double k1 = f(s, th), k2 = f(s + h / 2, th), k4 = f(s + h, th);
    const double th_mid = th + h / 2 * k1;
    const double th_end = th + h / 6 * (k1 + 4 * k2 + k4);
    x += h / 6 * (std::cos(th) + 4 * std::cos(th_mid) + std::cos(th_end));
    y += h / 6 * (std::sin(th) + 4 * std::sin(th_mid) + std::sin(th_end));
    th = th_end;
    oracle.points.push_back({x, y});
  }
  const TargetCurve lib = analytic_target("spiral", {{"c", c}, {"L", length}});
  EXPECT_NEAR(lib.points.back().x, oracle.points.back().x, 1e-6);
  EXPECT_NEAR(lib.points.back().y, oracle.points.back().y, 1e-6);

  const ArcLengthProfile p = build_profile(lib, 200);
  double ss_res = 0, ss_tot = 0, mean = 0;
  std::vector<double> want;
  for (double s : p.s_grid) want.push_back(c * s);
  for (double w : want) mean += w / want.size();
  for (size_t j = 0; j < want.size(); ++j) {
    ss_res += (p.kappa[j] - want[j]) * (p.kappa[j] - want[j]);
    ss_tot += (want[j] - mean) * (want[j] - mean);
  }
  EXPECT_GT(1 - ss_res / ss_tot, 0.999);
}

TEST(Curvature, RigidMotionInvariance) {
  const TargetCurve c = analytic_target("sine", {{"n", 800}});
  TargetCurve moved = c;
  for (Point& q : moved.points) q = rotate(q, 0.7) + Point{3, -2};
  const ArcLengthProfile a = build_profile(c, 150);
  const ArcLengthProfile b = build_profile(moved, 150);
  for (size_t j = 0; j < a.kappa.size(); ++j) EXPECT_NEAR(a.kappa[j], b.kappa[j], 1e-9);
  EXPECT_NEAR(b.initial_tangent, a.initial_tangent + 0.7, 1e-9);
}

TEST(Curvature, ScalingInvariance) {
  const TargetCurve c = analytic_target("spiral");
  TargetCurve big = c;
  for (Point& q : big.points) q = 2.5 * q;
  const ArcLengthProfile a = build_profile(c, 150);
  const ArcLengthProfile b = build_profile(big, 150);
  EXPECT_NEAR(b.total_length, 2.5 * a.total_length, 1e-9);
  for (size_t j = 0; j < a.kappa.size(); ++j) {
    EXPECT_NEAR(b.kappa[j], a.kappa[j] / 2.5, 1e-9);
  }
}

TEST(Curvature, ReparameterizationInvariance) {
  const TargetCurve coarse = analytic_target("sine", {{"n", 500}});
  const TargetCurve dense = analytic_target("sine", {{"n", 1000}});
  const ArcLengthProfile a = build_profile(coarse, 120);
  const ArcLengthProfile b = build_profile(dense, 120);
  const double scale = MaxAbs(a.kappa);
  for (size_t j = 0; j < a.kappa.size(); ++j) {
    EXPECT_LT(std::abs(a.kappa[j] - b.kappa[j]), 0.05 * scale);
  }
}

TEST(Analytic, CircleFamily) {
  const TargetCurve c = analytic_target("circle", {{"R", 1}});
  EXPECT_TRUE(c.closed);
  EXPECT_NEAR(c.points[0].x, 0.0, 1e-15);
  EXPECT_NEAR(c.points[0].y, -1.0, 1e-15);
  const ArcLengthProfile p = build_profile(c, 100);
  for (double k : p.kappa) EXPECT_NEAR(k, 1.0, 1e-3);
  EXPECT_NEAR(p.initial_tangent, 0.0, 1e-9);
}

TEST(Analytic, FlowerHasThreeFoldSymmetry) {
  const TargetCurve f = analytic_target("flower3", {{"n", 900}});
  EXPECT_TRUE(f.closed);
  // rotating by 2 pi / 3 maps the sample set onto itself
  for (size_t i = 0; i < f.points.size(); i += 37) {
    const Point q = rotate(f.points[i], 2 * kPi / 3);
    double best = 1e9;
    for (const Point& r : f.points) best = std::min(best, norm(q - r));
    EXPECT_LT(best, 1e-12);
  }
}

TEST(Analytic, Errors) {
  EXPECT_THROW(analytic_target("hexagon"), TargetError);
  EXPECT_THROW(analytic_target("circle", {{"R", -1}}), TargetError);
  EXPECT_THROW(analytic_target("circle", {{"radius", 1}}), TargetError);
}

TEST(ParseTarget, AnalyticSyntax) {
  EXPECT_TRUE(is_analytic("circle:R=2"));
  EXPECT_TRUE(is_analytic("spiral"));
  EXPECT_FALSE(is_analytic("letters/d.csv"));
  const TargetCurve c = parse_target("circle:R=2,n=100");
  EXPECT_EQ(c.points.size(), 100u);
  EXPECT_NEAR(norm(c.points[7]), 2.0, 1e-14);
  EXPECT_THROW(parse_target("circle:R"), TargetError);
  EXPECT_THROW(parse_target("circle:R=abc"), TargetError);
  EXPECT_THROW(parse_target("/no/such/file.csv"), TargetError);
}

class FileTest : public ::testing::Test {
 protected:
  std::string Write(const std::string& name, const std::string& body) {
    const std::string path = ::testing::TempDir() + name;
    std::ofstream(path) << body;
    paths_.push_back(path);
    return path;
  }
  void TearDown() override {
    for (const std::string& p : paths_) std::remove(p.c_str());
  }
  std::vector<std::string> paths_;
};

TEST_F(FileTest, CsvWithHeaderAndClosure) {
  const std::string path = Write("sq.csv", "x,y\n0,0\n1,0\n1,1\n0,1\n0,0\n");
  const TargetCurve c = load_points(path);
  EXPECT_TRUE(c.closed);
  EXPECT_EQ(c.points.size(), 4u);
  EXPECT_EQ(c.points[2].x, 1.0);
}

TEST_F(FileTest, CsvWithoutHeader) {
  const std::string path = Write("open.csv", "0 0\n1 0.5\n2 0\n3 0.5\n");
  const TargetCurve c = load_points(path);
  EXPECT_FALSE(c.closed);
  EXPECT_EQ(c.points.size(), 4u);
}

TEST_F(FileTest, CsvErrors) {
  EXPECT_THROW(load_points(Write("bad.csv", "x,y\n0,0\n1,zz\n2,0\n3,1\n")), TargetError);
  EXPECT_THROW(load_points(Write("three.csv", "0,0,0\n1,0,0\n2,0,1\n3,1,1\n")),
               TargetError);
  EXPECT_THROW(load_points(Write("short.csv", "0,0\n1,0\n")), TargetError);
}

TEST_F(FileTest, Json) {
  const TargetCurve a = load_points(Write("a.json", "[[0,0],[1,0],[2,1],[3,1]]"));
  EXPECT_FALSE(a.closed);
  EXPECT_EQ(a.points.size(), 4u);
  const TargetCurve b =
      load_points(Write("b.json", R"({"closed": true, "points": [[0,0],[1,0],[1,1],[0,1]]})"));
  EXPECT_TRUE(b.closed);
  EXPECT_THROW(load_points(Write("c.json", "[[0,0],[1]]")), TargetError);
  EXPECT_THROW(load_points(Write("d.json", "{\"pts\": []}")), TargetError);
}

}  // namespace
}  // namespace scissor::targets
