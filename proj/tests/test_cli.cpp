#include <doctest.h>

#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "lidar_forge/augment.hpp"
#include "lidar_forge/classes.hpp"
#include "lidar_forge/cli.hpp"
#include "lidar_forge/instance_db.hpp"
#include "lidar_forge/kitti_io.hpp"
#include "support/synthetic.hpp"

using namespace lidar_forge;
namespace t = lidar_forge::testing;

namespace {

struct CliRun {
  int code;
  std::string out;
  std::string err;
};

CliRun run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "lidar-forge");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

// Many tiny frames: a handful of points each.
void write_tiny_sequence(const fs::path& root, const std::string& seq, int frames) {
  const auto dir = root / "sequences" / seq;
  fs::create_directories(dir / "velodyne");
  fs::create_directories(dir / "labels");
  for (int f = 0; f < frames; ++f) {
    char name[16];
    std::snprintf(name, sizeof(name), "%06d", f);
    std::vector<Point> pts{{5.0f + f % 7, 1.0f, -1.0f, 0.1f}};
    write_points(pts, dir / "velodyne" / (std::string(name) + ".bin"));
    write_labels(std::vector<LabelRecord>{{classes::kRoad, 0}},
                 dir / "labels" / (std::string(name) + ".label"));
  }
}

void write_text(const fs::path& path, const std::string& text) { std::ofstream(path) << text; }

}  // namespace

TEST_CASE("invocation errors exit with 2") {
  t::TempDir dir("cli");
  CHECK(run_cli({}).code == cli::kInvalidInvocation);
  CHECK(run_cli({"frobnicate"}).code == cli::kInvalidInvocation);
  CHECK(run_cli({"stats"}).code == cli::kInvalidInvocation);
  CHECK(run_cli({"stats", "--data", (dir.path() / "nope").string()}).code ==
        cli::kInvalidInvocation);
  CHECK(run_cli({"--help"}).code == cli::kSuccess);

  t::write_dataset(dir.path() / "data", {"00"}, 1, 1);
  const auto data = (dir.path() / "data").string();
  CHECK(run_cli({"augment", "--data", data, "--out", data}).code == cli::kInvalidInvocation);
  CHECK(run_cli({"stats", "--data", data, "--stride", "0"}).code == cli::kInvalidInvocation);
  // Injection needs a database.
  CHECK(run_cli({"augment", "--data", data, "--out", (dir.path() / "o").string()}).code ==
        cli::kInvalidInvocation);

  write_text(dir.path() / "typo.json", R"({"p_fuson": 0.3})");
  const auto r = run_cli({"augment", "--data", data, "--out", (dir.path() / "o").string(),
                          "--config", (dir.path() / "typo.json").string()});
  CHECK(r.code == cli::kInvalidInvocation);
  CHECK(r.err.find("p_fuson") != std::string::npos);
}

TEST_CASE("build-db needs label directories") {
  t::TempDir dir("cli");
  t::write_dataset(dir.path(), {"00"}, 1, 1);
  fs::remove_all(dir.path() / "sequences/00/labels");
  const auto r = run_cli({"build-db", "--data", dir.path().string(), "--db",
                          (dir.path() / "x.db").string()});
  CHECK(r.code == cli::kInvalidInvocation);
  CHECK(r.err.find("labels") != std::string::npos);
}

TEST_CASE("build-db on an empty selection gives an empty database") {
  t::TempDir dir("cli");
  write_tiny_sequence(dir.path() / "data", "00", 5);
  const auto db_path = dir.path() / "out" / "e.db";
  const auto r = run_cli({"build-db", "--data", (dir.path() / "data").string(), "--db",
                          db_path.string(), "--first", "100"});
  CHECK(r.code == cli::kSuccess);
  CHECK(r.out.find("frames 0\n") != std::string::npos);
  CHECK(r.out.find("total 0\n") != std::string::npos);
  CHECK(load_database(db_path).empty());
}

TEST_CASE("build-db stride selection") {
  t::TempDir dir("cli");
  write_tiny_sequence(dir.path() / "data", "00", 1000);
  const auto r = run_cli({"build-db", "--data", (dir.path() / "data").string(), "--out",
                          (dir.path() / "out").string(), "--stride", "100"});
  CHECK(r.code == cli::kSuccess);
  CHECK(load_database(dir.path() / "out" / "instances.db").manifest().frames_scanned == 10);
  CHECK(r.out.find("frames 10\n") != std::string::npos);
}

TEST_CASE("build-db printed counts equal the stored manifest") {
  t::TempDir dir("cli");
  t::write_dataset(dir.path() / "data", {"00", "01"}, 2, 4);
  const auto db_path = dir.path() / "db" / "i.db";
  const auto r = run_cli({"build-db", "--data", (dir.path() / "data").string(), "--db",
                          db_path.string(), "--workers", "3"});
  REQUIRE(r.code == cli::kSuccess);
  const auto manifest = load_database(db_path).manifest();
  std::map<std::uint16_t, std::size_t> printed;
  std::size_t total = 0;
  for (const auto& l : lines(r.out)) {
    std::istringstream in(l);
    std::string word;
    in >> word;
    if (word == "class") {
      std::uint16_t id;
      std::string name;
      std::size_t n;
      in >> id >> name >> n;
      printed[id] = n;
    } else if (word == "total") {
      in >> total;
    }
  }
  CHECK(printed == manifest.counts);
  CHECK(total == manifest.total());
  CHECK(total > 0);

  std::ifstream side(dir.path() / "db" / "i.manifest.json");
  const auto j = nlohmann::json::parse(side);
  CHECK(j["total"].get<std::size_t>() == total);
  CHECK(j["frames_scanned"].get<std::size_t>() == 4);

  // A damaged frame is a partial failure.
  fs::resize_file(dir.path() / "data/sequences/01/velodyne/000001.bin", 7);
  const auto partial = run_cli({"build-db", "--data", (dir.path() / "data").string(), "--db",
                                (dir.path() / "db" / "j.db").string()});
  CHECK(partial.code == cli::kPartialFailure);
  CHECK(partial.out.find("errors 1\n") != std::string::npos);
}

TEST_CASE("augment with all probabilities zero copies the inputs") {
  t::TempDir dir("cli");
  t::write_dataset(dir.path() / "data", {"00"}, 3, 5);
  write_text(dir.path() / "off.json", R"({"p_global": 0, "p_fusion": 0, "p_inject": 0})");
  const auto r = run_cli({"augment", "--data", (dir.path() / "data").string(), "--out",
                          (dir.path() / "out").string(), "--config",
                          (dir.path() / "off.json").string()});
  REQUIRE(r.code == cli::kSuccess);
  for (const auto& f : list_frames(dir.path() / "data", "00")) {
    CHECK(t::hash_file(f.scan) ==
          t::hash_file(dir.path() / "out/sequences/00/velodyne" / f.scan.filename()));
    CHECK(t::hash_file(f.label) ==
          t::hash_file(dir.path() / "out/sequences/00/labels" / f.label.filename()));
  }
  std::ifstream report(dir.path() / "out/report.jsonl");
  int n = 0;
  for (std::string l; std::getline(report, l); ++n) {
    const auto j = nlohmann::json::parse(l);
    CHECK(j["frame"] == "00/00000" + std::to_string(n));
    CHECK(j["fusion"]["applied"] == false);
  }
  CHECK(n == 3);
}

TEST_CASE("augment is reproducible and independent of the worker count") {
  t::TempDir dir("cli");
  const auto data = (dir.path() / "data").string();
  t::write_dataset(dir.path() / "data", {"00", "02"}, 3, 6);
  REQUIRE(run_cli({"build-db", "--data", data, "--db", (dir.path() / "i.db").string()}).code ==
          cli::kSuccess);
  auto augment = [&](const std::string& out, const std::string& workers,
                     const std::string& seed) {
    return run_cli({"augment", "--data", data, "--out", (dir.path() / out).string(), "--db",
                    (dir.path() / "i.db").string(), "--seed", seed, "--workers", workers});
  };
  const auto a = augment("a", "1", "7");
  const auto b = augment("b", "1", "7");
  const auto c = augment("c", "4", "7");
  const auto d = augment("d", "1", "8");
  REQUIRE(a.code == cli::kSuccess);
  CHECK(a.out == c.out);
  CHECK(t::hash_tree(dir.path() / "a") == t::hash_tree(dir.path() / "b"));
  CHECK(t::hash_tree(dir.path() / "a") == t::hash_tree(dir.path() / "c"));
  CHECK(t::hash_tree(dir.path() / "a") != t::hash_tree(dir.path() / "d"));
}

TEST_CASE("augment can reverse ego-motion") {
  t::TempDir dir("cli");
  const auto data = (dir.path() / "data").string();
  t::write_dataset(dir.path() / "data", {"00"}, 2, 6);
  write_text(dir.path() / "off.json", R"({"p_global": 0, "p_fusion": 0, "p_inject": 0})");
  const auto r = run_cli({"augment", "--data", data, "--out", (dir.path() / "o").string(),
                          "--config", (dir.path() / "off.json").string(),
                          "--undo-ego-motion"});
  REQUIRE(r.code == cli::kSuccess);
  std::ifstream report(dir.path() / "o/report.jsonl");
  std::string first, second;
  std::getline(report, first);
  std::getline(report, second);
  CHECK(nlohmann::json::parse(first)["ego_motion"] == "skipped: first frame");
  CHECK(nlohmann::json::parse(second)["ego_motion"] == "applied");
  const auto f1 = list_frames(dir.path() / "data", "00")[1];
  CHECK(t::hash_file(f1.scan) !=
        t::hash_file(dir.path() / "o/sequences/00/velodyne/000001.bin"));
  CHECK(t::hash_file(f1.label) ==
        t::hash_file(dir.path() / "o/sequences/00/labels/000001.label"));
}

TEST_CASE("augment records frame failures and continues") {
  t::TempDir dir("cli");
  const auto data = (dir.path() / "data").string();
  t::write_dataset(dir.path() / "data", {"00"}, 3, 6);
  write_text(dir.path() / "off.json", R"({"p_inject": 0})");
  fs::resize_file(dir.path() / "data/sequences/00/labels/000001.label", 8);
  const auto r = run_cli({"augment", "--data", data, "--out", (dir.path() / "o").string(),
                          "--config", (dir.path() / "off.json").string()});
  CHECK(r.code == cli::kPartialFailure);
  CHECK(r.out.find("failures 1\n") != std::string::npos);
  CHECK(fs::exists(dir.path() / "o/sequences/00/velodyne/000002.bin"));
  std::ifstream report(dir.path() / "o/report.jsonl");
  std::vector<nlohmann::json> rows;
  for (std::string l; std::getline(report, l);) rows.push_back(nlohmann::json::parse(l));
  REQUIRE(rows.size() == 3);
  CHECK(rows[1].contains("error"));
}

TEST_CASE("stats matches the class distribution") {
  t::TempDir dir("cli");
  t::write_dataset(dir.path() / "data", {"00"}, 1, 8);
  const auto r = run_cli({"stats", "--data", (dir.path() / "data").string(), "--out",
                          (dir.path() / "out").string()});
  REQUIRE(r.code == cli::kSuccess);
  const auto labels =
      read_labels(dir.path() / "data/sequences/00/labels/000000.label");
  const auto dist = compute_distribution(labels);

  std::ifstream csv(dir.path() / "out/stats.csv");
  std::string header;
  std::getline(csv, header);
  CHECK(header == "class_id,name,points,share,frames");
  std::map<std::uint16_t, std::size_t> counts;
  for (std::string l; std::getline(csv, l);) {
    std::istringstream in(l);
    std::string id, name, points, share, frames;
    std::getline(in, id, ',');
    std::getline(in, name, ',');
    std::getline(in, points, ',');
    std::getline(in, share, ',');
    std::getline(in, frames, ',');
    const auto c = static_cast<std::uint16_t>(std::stoul(id));
    counts[c] = std::stoul(points);
    CHECK(name == classes::name(c));
    CHECK(std::stod(share) == doctest::Approx(dist.share(c)).epsilon(1e-8));
    CHECK(frames == "1");
  }
  CHECK(counts == dist.counts);
  CHECK(r.out.find("total " + std::to_string(labels.size()) + " points in 1 frames") !=
        std::string::npos);
}

TEST_CASE("stats on an empty selection") {
  t::TempDir dir("cli");
  write_tiny_sequence(dir.path() / "data", "00", 3);
  const auto r = run_cli({"stats", "--data", (dir.path() / "data").string(), "--first", "50"});
  CHECK(r.code == cli::kSuccess);
  CHECK(lines(r.out).size() == 2);
  CHECK(r.out.find("total 0 points in 0 frames") != std::string::npos);
}

TEST_CASE("cars outnumber motorcyclists by an order of magnitude") {
  t::TempDir dir("cli");
  t::write_dataset(dir.path() / "data", {"00"}, 8, 9);
  const auto r = run_cli({"stats", "--data", (dir.path() / "data").string(), "--out",
                          (dir.path() / "out").string()});
  REQUIRE(r.code == cli::kSuccess);
  std::ifstream csv(dir.path() / "out/stats.csv");
  std::map<std::uint16_t, double> share;
  std::string l;
  std::getline(csv, l);
  while (std::getline(csv, l)) {
    std::istringstream in(l);
    std::string id, name, points, s;
    std::getline(in, id, ',');
    std::getline(in, name, ',');
    std::getline(in, points, ',');
    std::getline(in, s, ',');
    share[static_cast<std::uint16_t>(std::stoul(id))] = std::stod(s);
  }
  REQUIRE(share.count(classes::kMotorcyclist));
  CHECK(share.at(classes::kCar) > 10.0 * share.at(classes::kMotorcyclist));
}

TEST_CASE("render writes range, class and provenance images") {
  t::TempDir dir("cli");
  const auto data = (dir.path() / "data").string();
  t::write_dataset(dir.path() / "data", {"00"}, 2, 10);
  const auto out = dir.path() / "img";
  auto r = run_cli({"render", "--data", data, "--out", out.string(), "--frame", "00/1"});
  CHECK(r.code == cli::kSuccess);
  CHECK(fs::exists(out / "00_000001_range.png"));
  CHECK(fs::exists(out / "00_000001_classes.png"));

  r = run_cli({"render", "--data", data, "--out", out.string(), "--frame", "00/0",
               "--fuse-with", "00/1", "--seed", "3"});
  CHECK(r.code == cli::kSuccess);
  CHECK(fs::exists(out / "00_000000_provenance.png"));
  CHECK(fs::exists(out / "00_000000_fused_range.png"));

  CHECK(run_cli({"render", "--data", data, "--out", out.string(), "--frame", "00/9"}).code ==
        cli::kInvalidInvocation);
  CHECK(run_cli({"render", "--data", data, "--out", out.string(), "--frame", "zero"}).code ==
        cli::kInvalidInvocation);
}
