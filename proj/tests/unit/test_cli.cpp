#include "fixtures.hpp"

#include <wavecouple/cli.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace wavecouple;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code;
    std::string out, err;
};

Run run_cli(std::vector<std::string> args)
{
    std::ostringstream o, e;
    const int c = cli::run(std::move(args), o, e);
    return {c, o.str(), e.str()};
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

fs::path scratch(const std::string& name)
{
    const auto d = fs::temp_directory_path() / ("wavecouple_cli_" + name);
    fs::remove_all(d);
    return d;
}

const std::vector<std::string> kSmall{"--set", "mc.n_traj=400", "--set", "grid.n_steps=128", "--set", "space.N=6"};

std::vector<std::string> with(std::vector<std::string> a, const std::vector<std::string>& b)
{
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

} // namespace

TEST(Config, DefaultsAndOverrides)
{
    const auto c = parse_config("[space]\nN = 12\n[nonlinearity]\nrho = 2\n", {"mc.seed=9", "grid.scheme=exp_euler"});
    EXPECT_EQ(c.N, 12u);
    EXPECT_EQ(c.rho, 2.0);
    EXPECT_EQ(c.seed, 9u);
    EXPECT_EQ(c.scheme, "exp_euler");
    EXPECT_EQ(c.n_steps, 256u);
    const auto r = validate_config(c);
    EXPECT_EQ(r.ex.space().modes(), 12u);
    EXPECT_EQ(r.ex.scheme, Scheme::exp_euler);
    EXPECT_EQ(r.z0.x[0], 0.5);
    EXPECT_EQ(r.h1[1], 0.1);
}

TEST(Config, RejectsBadInput)
{
    EXPECT_THROW(parse_config("[space]\nbogus = 1\n"), ConfigError);
    EXPECT_THROW(parse_config("", {"nosection=1"}), ConfigError);
    EXPECT_THROW(parse_config("", {"space.N"}), ConfigError);
    EXPECT_THROW(parse_config("[grid]\ndt = 0.01\nn_steps = 10\n"), ConfigError);
    EXPECT_THROW(parse_config("[space]\nN = abc\n"), ConfigError);
    EXPECT_THROW(validate_config(parse_config("", {"nonlinearity.rho=0.5"})), ConfigError);
    EXPECT_THROW(validate_config(parse_config("", {"grid.n_steps=16"})), ConfigError); // Euler stability
    EXPECT_THROW(validate_config(parse_config("", {"direction.h1=1,2,3,4,5,6,7,8,9"})), ConfigError);
}

TEST(Config, HashIsStableAndSensitive)
{
    const auto a = parse_config("[mc]\nseed = 3\n");
    const auto b = parse_config("", {"mc.seed=3"});
    const auto c = parse_config("", {"mc.seed=4"});
    EXPECT_EQ(config_hash(a), config_hash(b));
    EXPECT_NE(config_hash(a), config_hash(c));
    EXPECT_EQ(config_to_json(a).dump(), config_to_json(b).dump());
}

TEST(Cli, UsageErrors)
{
    const auto a = run_cli({"frobnicate"});
    EXPECT_EQ(a.code, 2);
    EXPECT_NE(a.err.find("usage"), std::string::npos);
    EXPECT_EQ(run_cli({}).code, 2);
    EXPECT_EQ(run_cli({"simulate", "--format", "xml"}).code, 2);
    EXPECT_EQ(run_cli({"simulate", "--config", "/nonexistent/x.ini"}).code, 2);
    EXPECT_EQ(run_cli({"simulate", "--set", "space.bogus=1"}).code, 2);
}

TEST(Cli, ConstantsReportsCertifiedValues)
{
    const auto d = scratch("constants");
    const auto r = run_cli({"constants", "--out-dir", d.string()});
    EXPECT_EQ(r.code, 0) << r.err;
    const auto j = nlohmann::json::parse(slurp(d / "constants.json"));
    EXPECT_EQ(j["subcommand"], "constants");
    EXPECT_EQ(j["verdict"], "pass");
    EXPECT_TRUE(j.contains("config_hash"));
    EXPECT_TRUE(j["config"].is_object());
    fs::remove_all(d);
}

TEST(Cli, SimulateWritesCsv)
{
    const auto d = scratch("simulate");
    const auto r = run_cli(with({"simulate", "--format", "both", "--out-dir", d.string()}, kSmall));
    ASSERT_EQ(r.code, 0) << r.err;
    const std::string path = slurp(d / "path.csv");
    EXPECT_EQ(path.substr(0, path.find('\n')), "t,mode,X,Y,X_tilde,Y_tilde,log_weight");
    EXPECT_TRUE(fs::exists(d / "profiles.csv"));
    EXPECT_TRUE(fs::exists(d / "simulate.json"));
    EXPECT_TRUE(fs::exists(d / "simulate.csv"));
    fs::remove_all(d);
}

TEST(Cli, DerivativeIsThreadIndependent)
{
    const auto d1 = scratch("t1"), d3 = scratch("t3");
    const auto base = with({"derivative", "--set", "nonlinearity.family=linear_zero", "--seed", "5"}, kSmall);
    const auto a = run_cli(with(base, {"--threads", "1", "--out-dir", d1.string()}));
    const auto b = run_cli(with(base, {"--threads", "3", "--out-dir", d3.string()}));
    ASSERT_EQ(a.code, 0) << a.err << a.out;
    ASSERT_EQ(b.code, 0) << b.err;
    EXPECT_EQ(slurp(d1 / "derivative.json"), slurp(d3 / "derivative.json"));
    EXPECT_EQ(a.out, b.out);
    fs::remove_all(d1);
    fs::remove_all(d3);
}

TEST(Cli, ExitCodesForFailureModes)
{
    const auto d = scratch("codes");
    // guard = 0 trips on the first state: every trajectory is excluded
    EXPECT_EQ(run_cli(with({"selftest", "--set", "mc.guard=0", "--out-dir", d.string()}, kSmall)).code, 3);
    // rough rho without the opt-in is a precondition error
    EXPECT_EQ(run_cli(with({"derivative", "--set", "nonlinearity.rho=1.5", "--out-dir", d.string()}, kSmall)).code, 2);
    // the log-Harnack check needs a positive functional
    EXPECT_EQ(run_cli(with({"log-harnack", "--set", "functional.kind=quadratic", "--out-dir", d.string()}, kSmall)).code,
              2);
    fs::remove_all(d);
}

TEST(Cli, CorruptPhiFailsTheSelftest)
{
    const auto d = scratch("corrupt");
    const auto r = run_cli(with({"selftest", "--set", "run.corrupt_phi=true", "--out-dir", d.string()}, kSmall));
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.out.find("FAIL difference_identity"), std::string::npos) << r.out;
    fs::remove_all(d);
}
