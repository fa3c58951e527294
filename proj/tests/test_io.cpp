#include <catch2/catch_amalgamated.hpp>

#include <phgp/benchmarks.hpp>
#include <phgp/io.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>

using namespace phgp;

namespace {

struct TempDir {
  std::filesystem::path dir;
  TempDir() {
    dir = std::filesystem::temp_directory_path() / "phgp_io_test";
    std::filesystem::create_directories(dir);
  }
  ~TempDir() { std::filesystem::remove_all(dir); }
  std::string path(const std::string& name) const { return (dir / name).string(); }
};

}  // namespace

TEST_CASE("circuit trajectory round trips bit-exactly") {
  TempDir tmp;
  Trajectory traj = generate_circuit();
  const std::string file = tmp.path("circuit.csv");
  write_trajectory_csv(file, traj);
  Trajectory back = read_trajectory_csv(file);

  CHECK((back.times - traj.times).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.states - traj.states).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.inputs - traj.inputs).cwiseAbs().maxCoeff() == 0.0);
  REQUIRE(back.derivs.has_value());
  CHECK((*back.derivs - *traj.derivs).cwiseAbs().maxCoeff() == 0.0);
  CHECK(back.metadata == traj.metadata);
}

TEST_CASE("derivative columns are optional") {
  TempDir tmp;
  Trajectory traj = generate_circuit({1.0, 1.0, 1.0, 2.0, 1000});
  traj.derivs.reset();
  const std::string file = tmp.path("no_derivs.csv");
  write_trajectory_csv(file, traj);

  std::ifstream f(file);
  std::string header;
  std::getline(f, header);
  CHECK(header == "t,x1,x2,x3,u1");

  Trajectory back = read_trajectory_csv(file);
  CHECK_FALSE(back.derivs.has_value());
  CHECK(back.n_samples() == 1001);
}

TEST_CASE("truncated row names the line") {
  TempDir tmp;
  const std::string file = tmp.path("bad.csv");
  {
    std::ofstream f(file);
    f << "t,x1,u1\n0,1,2\n0.5,3\n";
  }
  CHECK_THROWS_WITH(read_trajectory_csv(file), Catch::Matchers::ContainsSubstring(":3:"));
}

TEST_CASE("malformed header and values are rejected") {
  TempDir tmp;
  const std::string file = tmp.path("bad2.csv");
  {
    std::ofstream f(file);
    f << "time,x1,u1\n0,1,2\n";
  }
  CHECK_THROWS_WITH(read_trajectory_csv(file), Catch::Matchers::ContainsSubstring(":1:"));
  {
    std::ofstream f(file);
    f << "t,x1,x3,u1\n0,1,2,3\n";
  }
  CHECK_THROWS_WITH(read_trajectory_csv(file), Catch::Matchers::ContainsSubstring("header"));
  {
    std::ofstream f(file);
    f << "t,x1,u1\n0,abc,2\n";
  }
  CHECK_THROWS_WITH(read_trajectory_csv(file), Catch::Matchers::ContainsSubstring("not a number"));
}

TEST_CASE("system json round trips") {
  TempDir tmp;
  PhDaeSystem sys = pendulum_system();
  const std::string file = tmp.path("pendulum.json");
  write_system_json(file, sys);
  PhDaeSystem back = read_system_json(file);
  CHECK((back.E - sys.E).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.J - sys.J).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.R - sys.R).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.B - sys.B).cwiseAbs().maxCoeff() == 0.0);
  CHECK(back.state_labels == sys.state_labels);
  CHECK_FALSE(bool(back.effort));

  nlohmann::json doc;
  {
    std::ifstream f(file);
    doc = nlohmann::json::parse(f);
  }
  CHECK(doc.contains("E"));
  CHECK(doc.contains("labels"));
  CHECK(doc["E"][0][0].get<double>() == 1.0);
}

TEST_CASE("system json rejects broken structure") {
  TempDir tmp;
  const std::string file = tmp.path("broken.json");
  {
    std::ofstream f(file);
    f << R"({"E": [[1,0],[0,0]], "J": [[0,5],[-1,0]], "R": [[0,0],[0,0]], "B": [[0],[1]]})";
  }
  CHECK_THROWS_AS(read_system_json(file), std::invalid_argument);  // J not skew
}
