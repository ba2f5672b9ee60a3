#include <catch2/catch_amalgamated.hpp>

#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using nlohmann::json;

namespace {

namespace fs = std::filesystem;

struct RunResult {
    int exit_code;
    std::string out;
};

RunResult run_cli(std::string const & args)
{
    static int counter = 0;
    auto outfile = fs::temp_directory_path() /
                   ("shimcm-cli-out-" + std::to_string(counter++) + ".txt");
    std::string cmd = std::string(SHIMCM_CLI_PATH) + " " + args + " > " +
                      outfile.string() + " 2>/dev/null";
    int rc = std::system(cmd.c_str());
    std::ifstream in(outfile);
    std::stringstream ss;
    ss << in.rdbuf();
    fs::remove(outfile);
    return {WEXITSTATUS(rc), ss.str()};
}

// minimal structural validation against the shipped JSON schema: required
// keys, primitive types, and one level of object/array nesting
void check_against_schema(json const & value, json const & schema)
{
    auto type = schema.at("type").get<std::string>();
    if (type == "object") {
        REQUIRE(value.is_object());
        for (auto const & req : schema.at("required"))
            REQUIRE(value.contains(req.get<std::string>()));
        for (auto const & [key, sub] : schema.at("properties").items())
            if (value.contains(key))
                check_against_schema(value.at(key), sub);
    } else if (type == "array") {
        REQUIRE(value.is_array());
        for (auto const & item : value)
            check_against_schema(item, schema.at("items"));
    } else if (type == "integer") {
        REQUIRE(value.is_number_integer());
    } else if (type == "boolean") {
        REQUIRE(value.is_boolean());
    } else if (type == "string") {
        REQUIRE(value.is_string());
    }
}

json load_schema(std::string const & name)
{
    std::ifstream in(std::string(SHIMCM_SCHEMA_DIR) + "/" + name);
    REQUIRE(in.good());
    return json::parse(in);
}

} // namespace

TEST_CASE("cli fiber emits the documented JSON")
{
    auto r = run_cli("fiber --D 6 --N 5 --delta -19");
    REQUIRE(r.exit_code == 0);
    auto j = json::parse(r.out);
    CHECK(j["D"] == 6);
    CHECK(j["N"] == 5);
    CHECK(j["delta"] == -19);
    CHECK(j["b"] == 2);
    CHECK(j["dK_part"] == 6);
    REQUIRE(j["classes"].size() == 2);
    CHECK(j["classes"][0]["count"] == 8);
    CHECK(j["classes"][0]["conductor"] == 1);
    CHECK(j["classes"][1]["count"] == 4);
    CHECK(j["classes"][1]["conductor"] == 5);
    CHECK(j["classes"][1]["rel_degree"] == 4);
    check_against_schema(j, load_schema("fiber.schema.json"));

    // keys appear exactly as documented, in order
    auto pos = [&](std::string const & k) { return r.out.find("\"" + k + "\""); };
    CHECK(pos("D") < pos("N"));
    CHECK(pos("N") < pos("delta"));
    CHECK(pos("delta") < pos("b"));
    CHECK(pos("b") < pos("dK_part"));
    CHECK(pos("dK_part") < pos("base"));
    CHECK(pos("base") < pos("classes"));

    // byte-identical across runs
    auto r2 = run_cli("fiber --D 6 --N 5 --delta -19");
    CHECK(r.out == r2.out);
}

TEST_CASE("cli fiber single class at level one")
{
    auto r = run_cli("fiber --D 6 --N 1 --delta -19");
    REQUIRE(r.exit_code == 0);
    auto j = json::parse(r.out);
    REQUIRE(j["classes"].size() == 1);
    CHECK(j["classes"][0]["abs_degree"] == 2);
}

TEST_CASE("cli exit codes")
{
    auto r = run_cli("fiber --D 12 --N 5 --delta -19");
    CHECK(r.exit_code == 2);
    auto j = json::parse(r.out);
    CHECK(j["error"]["code"] == 2);

    r = run_cli("fiber --D 6 --N 5 --delta -7"); // 2 splits in Q(sqrt(-7))
    CHECK(r.exit_code == 3);
    j = json::parse(r.out);
    CHECK(j["error"]["code"] == 3);

    r = run_cli("volcano-dump --ell 3 --delta-K -19 --f0 6 --depth 1");
    CHECK(r.exit_code == 2); // ell | f0
}

TEST_CASE("cli volcano dump")
{
    auto r = run_cli("volcano-dump --ell 3 --delta-K -19 --f0 1 --depth 2 --sigma");
    REQUIRE(r.exit_code == 0);
    auto j = json::parse(r.out);
    CHECK(j["surface_shape"] == "isolated");
    int fixed1 = 0;
    for (auto const & v : j["vertices"])
        if (v["level"] == 1 && v["fixed"])
            fixed1++;
    CHECK(fixed1 == 2);
    check_against_schema(j, load_schema("volcano.schema.json"));

    r = run_cli("volcano-dump --ell 5 --delta-K -19 --f0 1 --depth 0");
    REQUIRE(r.exit_code == 0);
    j = json::parse(r.out);
    CHECK(j["surface_shape"] == "cycle");
    for (auto const & v : j["vertices"])
        CHECK_FALSE(v["fixed"].get<bool>());
}

TEST_CASE("cli least-degree with a cached table")
{
    auto cache = fs::path(SHIMCM_TEST_CACHE_DIR);
    fs::create_directories(cache);
    std::string common = " --table-bound 200000 --cache-dir " + cache.string() +
                         " --format json";
    auto cold = run_cli("least-degree --D 6 --N 5" + common);
    REQUIRE(cold.exit_code == 0);
    auto j = json::parse(cold.out);
    CHECK(j["d_cm_x0"] == 2);
    CHECK(j["d_cm_x1"] == 2);
    CHECK(j["conditional"] == false);

    auto warm = run_cli("least-degree --D 6 --N 5" + common);
    CHECK(warm.out == cold.out);

    auto r = run_cli("least-degree --D 10 --N 7" + common);
    j = json::parse(r.out);
    CHECK(j["d_cm_x0"] == 2);
    CHECK(j["d_cm_x1"] == 2);
}

TEST_CASE("cli sporadic scan over a small range")
{
    auto cache = fs::path(SHIMCM_TEST_CACHE_DIR);
    fs::create_directories(cache);
    auto r = run_cli("sporadic-scan --dn-max 100 --table-bound 200000 --cache-dir " +
                     cache.string() + " --data-dir " + std::string(SHIMCM_DATA_DIR) +
                     " --jobs 2");
    REQUIRE(r.exit_code == 0);
    std::istringstream lines(r.out);
    std::string line;
    std::getline(lines, line);
    CHECK(line == "D,N,verdict,rule,d_cm,genus,heegner_disc,bound_rhs");
    bool saw_61 = false, saw_851 = false;
    int rows = 0;
    while (std::getline(lines, line)) {
        rows++;
        if (line.rfind("6,1,no_sporadic", 0) == 0)
            saw_61 = true;
        if (line.rfind("85,1,sporadic_cm", 0) == 0)
            saw_851 = true;
    }
    CHECK(saw_61);
    CHECK(saw_851);
    CHECK(rows > 20);
    // dn-max 6 leaves exactly the pair (6,1)
    auto r6 = run_cli("sporadic-scan --dn-max 6 --table-bound 200000 --cache-dir " +
                      cache.string() + " --data-dir " + std::string(SHIMCM_DATA_DIR));
    std::istringstream l6(r6.out);
    std::getline(l6, line);
    int count = 0;
    while (std::getline(l6, line))
        if (!line.empty()) {
            count++;
            CHECK(line.rfind("6,1,", 0) == 0);
        }
    CHECK(count == 1);

    // worker count must not change the output
    auto serial = run_cli("sporadic-scan --dn-max 100 --table-bound 200000"
                          " --cache-dir " + cache.string() + " --data-dir " +
                          std::string(SHIMCM_DATA_DIR) + " --jobs 1");
    CHECK(serial.out == r.out);
}
