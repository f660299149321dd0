#include "doctest.h"

#include <functional>
#include <initializer_list>
#include <stdexcept>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "nilab/lab.hpp"

using namespace nilab;

namespace {

bool has_field(const std::vector<ConfigError>& e, const std::string& f)
{
    for (const auto& x : e)
        if (x.field == f) return true;
    return false;
}

} // namespace

TEST_CASE("config parsing")
{
    ExperimentConfig cfg;
    auto e = parse_config("schema = nilab-config/1\n# comment\na = 3\nmodes = 1..3\ntol = 1e-8  # trailing\n", cfg);
    CHECK(e.empty());
    CHECK(cfg.a == 3);
    CHECK(cfg.modes == std::vector<int>{1, 2, 3});
    CHECK(cfg.tol == 1e-8);

    ExperimentConfig c2;
    e = parse_config("schema = nilab-config/1\nbogus = 1\ncutoff = many\n", c2);
    CHECK(has_field(e, "bogus"));
    CHECK(has_field(e, "cutoff"));

    ExperimentConfig c3;
    CHECK(has_field(parse_config("a = 2\n", c3), "schema"));
}

TEST_CASE("config validation")
{
    ExperimentConfig cfg;
    CHECK(validate_config(cfg, "").empty());
    cfg.d = 3;   // det 3
    CHECK(has_field(validate_config(cfg, ""), "matrix"));

    ExperimentConfig s;
    s.modes = {0, 1};
    CHECK(has_field(validate_config(s, "spectrum"), "modes"));

    ExperimentConfig t;
    t.tol = -1;
    CHECK(has_field(validate_config(t, ""), "tol"));

    ExperimentConfig o;
    CHECK(has_field(validate_config(o, "deviation"), "observable"));
    CHECK(has_field(validate_config(o, "cohomology"), "observable"));
}

TEST_CASE("mode lists")
{
    CHECK(parse_mode_list("1..4") == std::vector<int>{1, 2, 3, 4});
    CHECK(parse_mode_list("1,2,5") == std::vector<int>{1, 2, 5});
    CHECK_FALSE(parse_mode_list("x").has_value());
    CHECK_FALSE(parse_mode_list("4..1").has_value());
}

TEST_CASE("config hash ignores out and jobs only")
{
    ExperimentConfig a, b;
    b.out = "elsewhere";
    b.jobs = 8;
    CHECK(config_hash(a) == config_hash(b));
    CHECK(config_hash(a).size() == 16);
    b.a = 5;
    CHECK(config_hash(a) != config_hash(b));
    CHECK(config_to_json(a).find("\"cutoff\"") != std::string::npos);
}

TEST_CASE("atomic write")
{
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "nilab_unit_write";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const std::string p = (dir / "a.txt").string();
    write_atomic(p, "one");
    write_atomic(p, "two");
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    CHECK(ss.str() == "two");
    int files = 0;
    for (const auto& e : fs::directory_iterator(dir)) (void)e, ++files;
    CHECK(files == 1);
    fs::remove_all(dir);
}

TEST_CASE("selftest helpers")
{
    const Automorphism A = stable_generator(2, 1, 3, 2);
    const auto d = group_algebra_defects(A, LatticeSpec{1}, 3, 200);
    CHECK(d.associativity < 1e-12);
    CHECK(d.inverse < 1e-12);
    CHECK(d.reduction < 1e-12);
    CHECK(d.semigroup < 1e-12);
    CHECK(partition_sum_defect(50.0, 8, 500) < 1e-12);
    CHECK(renorm_identity_defect(A, LatticeSpec{1}, 3, 100) < 1e-9);
}
