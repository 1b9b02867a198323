#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <string>

#include "test_support.hpp"

using namespace ebm;
namespace ts = test_support;

namespace {

struct TempFile {
    std::string path;
    explicit TempFile(const std::string& name) : path("/tmp/ebm_csv_" + name) {}
    ~TempFile() { std::remove(path.c_str()); }
    void write(const std::string& content) const {
        std::ofstream out(path);
        out << content;
    }
};

} // namespace

TEST_CASE("plain CSV with a header round-trips") {
    RngStream rng(700, 0);
    const Dataset data = ts::random_binary_dataset(9, 3, rng);
    TempFile file("roundtrip.csv");
    write_csv(data, file.path);
    const Dataset loaded = read_csv(file.path, UnitFamily::Binary);
    CHECK(loaded.dim == 3);
    CHECK(loaded.rows == data.rows);
}

TEST_CASE("headerless CSV parses too") {
    TempFile file("noheader.csv");
    file.write("1,0,1\n0,1,0\n");
    const Dataset data = read_csv(file.path, UnitFamily::Binary);
    REQUIRE(data.size() == 2);
    CHECK(data.rows[0] == Vector{1, 0, 1});
}

TEST_CASE("gaussian values keep full precision through a round-trip") {
    Dataset data;
    data.dim = 2;
    data.family = UnitFamily::Gaussian;
    data.rows = {{0.1234567890123456789, -3.14159265358979},
                 {1e-17, 12345678.87654321}};
    TempFile file("precision.csv");
    write_csv(data, file.path);
    const Dataset loaded = read_csv(file.path, UnitFamily::Gaussian);
    CHECK(loaded.rows == data.rows);
}

TEST_CASE("bad rows are reported with their row number") {
    TempFile file("bad.csv");
    file.write("a,b,c\n1,0,1\n1,oops,0\n");
    try {
        read_csv(file.path, UnitFamily::Binary);
        FAIL("expected a validation error");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).find("row 3") != std::string::npos);
    }
}

TEST_CASE("ragged rows are rejected") {
    TempFile file("ragged.csv");
    file.write("1,0,1\n1,0\n");
    CHECK_THROWS_AS(read_csv(file.path, UnitFamily::Binary), ValidationError);
}

TEST_CASE("family domain violations name the offending value") {
    TempFile file("domain.csv");
    file.write("1,0\n0.5,1\n");
    try {
        read_csv(file.path, UnitFamily::Binary);
        FAIL("expected a validation error");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).find("0.5") != std::string::npos);
    }
}

TEST_CASE("a fully empty file is rejected") {
    TempFile file("empty.csv");
    file.write("");
    CHECK_THROWS_AS(read_csv(file.path, UnitFamily::Binary), ValidationError);
}

TEST_CASE("a header-only file is an empty dataset with the header's dimension") {
    TempFile file("headeronly_in.csv");
    file.write("v0,v1\n");
    const Dataset data = read_csv(file.path, UnitFamily::Binary);
    CHECK(data.size() == 0);
    CHECK(data.dim == 2);
}

TEST_CASE("writing zero rows yields a header-only file") {
    Dataset data;
    data.dim = 3;
    data.family = UnitFamily::Binary;
    TempFile file("headeronly.csv");
    write_csv(data, file.path);
    std::ifstream in(file.path);
    std::string line;
    REQUIRE(std::getline(in, line));
    CHECK(line == "v0,v1,v2");
    CHECK_FALSE(std::getline(in, line));
}

TEST_CASE("sequence CSV groups rows by their id in first-appearance order") {
    TempFile file("seq.csv");
    file.write("seq_id,x0,x1\nb,1,0\nb,0,1\na,1,1\nb,1,1\na,0,0\n");
    const SequenceDataset data = read_sequence_csv(file.path, UnitFamily::Binary);
    REQUIRE(data.sequences.size() == 2);
    CHECK(data.sequences[0].size() == 3); // id "b" appeared first
    CHECK(data.sequences[1].size() == 2);
    CHECK(data.sequences[0][2] == Vector{1, 1});
    CHECK(data.sequences[1][0] == Vector{1, 1});
}

TEST_CASE("sequence rows need an id plus values") {
    TempFile file("seqbad.csv");
    file.write("only_one_field\n");
    CHECK_THROWS_AS(read_sequence_csv(file.path, UnitFamily::Binary), ValidationError);
}
