#include <doctest.h>

#include <fstream>
#include <sstream>

#include "rotdop/config.hpp"
#include "rotdop/output.hpp"

using namespace rotdop;

namespace {

std::string read(const std::string &path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const std::string kDefault = std::string(ROTDOP_SOURCE_DIR) + "/configs/default.json";

} // namespace

TEST_SUITE("config") {

TEST_CASE("bundled default config parses with converted units") {
  const auto rc = load_run_config(kDefault);
  const auto &c = rc.physical;
  CHECK(c.field_gauss == 4.0);
  CHECK(c.uv.detuning == doctest::Approx(mhz(-20)));
  CHECK(c.ir1.rabi == doctest::Approx(mhz(8)));
  CHECK(c.ir1.polarization == Polarization::Pi);
  CHECK(c.ir2.beam.l() == -2);
  CHECK(c.ir1.beam.waist() == doctest::Approx(20e-6));
  CHECK(c.micromotion.direction == doctest::Approx(deg(74)));
  CHECK(c.dephasings.channels.size() == 2);
  CHECK(c.dephasings.channels[0].rate == doctest::Approx(khz(100)));
  CHECK(c.evolve.periodic_warm_start);
  CHECK(rc.scan.radii.size() == 15);
  CHECK(rc.scan.radii.back() == doctest::Approx(40e-6));
  CHECK(rc.scan.angles.size() == 24);
  CHECK(rc.fit.velocities.front() == 50.0);
  CHECK(rc.fit.velocities.back() == 300.0);
  CHECK(rc.analytic.params.gamma_tilde() == doctest::Approx(1e-3));
  // The ion sits 20 um from the vortex axes.
  const auto kin = kinematics_from_cartesian(c.ir1.beam, c.ion_position, {0, 0, 0});
  CHECK(kin.r == doctest::Approx(20e-6).epsilon(1e-5));
}

TEST_CASE("serialization round trip keeps the fingerprint") {
  const auto rc = load_run_config(kDefault);
  const auto j = to_json(rc);
  const auto back = parse_run_config(j.dump(2));
  CHECK(fingerprint(to_json(back)) == fingerprint(j));
  CHECK(fingerprint(back.physical) == fingerprint(rc.physical));
  // A result sidecar (config nested under "config") is accepted as input.
  nlohmann::ordered_json sidecar{{"command", "spectrum"}, {"config", j}};
  CHECK(fingerprint(to_json(parse_run_config(sidecar.dump()))) == fingerprint(j));
}

TEST_CASE("missing required sections name the field") {
  auto j = nlohmann::json::parse(read(kDefault));
  j.erase("beams");
  try {
    parse_run_config(j.dump(2));
    FAIL("expected ConfigError");
  } catch (const ConfigError &e) {
    CHECK(e.field == "beams");
  }
}

TEST_CASE("type errors carry the dotted path and line") {
  std::string text = read(kDefault);
  const auto pos = text.find("\"rabi_mhz\": 8.0");
  REQUIRE(pos != std::string::npos);
  text.replace(pos, 15, "\"rabi_mhz\": \"x\"");
  const auto line = static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<long>(pos), '\n')) + 1;
  try {
    parse_run_config(text);
    FAIL("expected ConfigError");
  } catch (const ConfigError &e) {
    CHECK(e.field == "drives.ir1.rabi_mhz");
    CHECK(e.line == line);
  }
}

TEST_CASE("malformed JSON reports a line") {
  try {
    parse_run_config("{\n  \"atom\": {\n    \"field_gauss\": 4,,\n  }\n}");
    FAIL("expected ConfigError");
  } catch (const ConfigError &e) {
    CHECK(e.line == 3);
  }
}

TEST_CASE("invalid values are rejected") {
  auto base = nlohmann::json::parse(read(kDefault));
  auto bad = [&](auto mutate) {
    auto j = base;
    mutate(j);
    CHECK_THROWS_AS(parse_run_config(j.dump()), ConfigError);
  };
  bad([](auto &j) { j["atom"]["field_gauss"] = -1.0; });
  bad([](auto &j) { j["drives"]["ir1"]["polarization"] = "circular"; });
  bad([](auto &j) { j["beams"]["ir1"]["waist_um"] = 0.0; });
  bad([](auto &j) { j["scan"]["mode"] = "sideways"; });
  bad([](auto &j) { j["fit"]["free"] = {"rabi_uv", "temperature"}; });
  bad([](auto &j) { j["sweep"]["dip"] = "middle"; });
  bad([](auto &j) { j["dynamics"]["window_us"] = 0.0; });
  bad([](auto &j) { j["fit"]["percentile"] = 1.5; });
}

TEST_CASE("number lists accept ranges") {
  auto j = nlohmann::json::parse(read(kDefault));
  j["scan"]["radii_um"] = {10.0, 20.0};
  j["scan"]["angles_deg"] = {{"start", 0.0}, {"stop", 90.0}, {"step", 30.0}};
  const auto rc = parse_run_config(j.dump());
  CHECK(rc.scan.radii.size() == 2);
  CHECK(rc.scan.angles.size() == 4);
  CHECK(rc.scan.angles.back() == doctest::Approx(deg(90)));
}

TEST_CASE("csv formatting") {
  CHECK(format_number(0.1) == "0.1");
  CHECK(std::stod(format_number(1.0 / 3.0)) == 1.0 / 3.0);
  CHECK(csv_escape("a,b") == "\"a,b\"");
  CHECK(csv_escape("say \"hi\"") == "\"say \"\"hi\"\"\"");
  CsvTable t;
  t.header = {"x", "y"};
  t.add({"1", "2"});
  CHECK(to_csv(t) == "x,y\r\n1,2\r\n");
  CHECK(output_format_from_string("both") == OutputFormat::Both);
  CHECK_THROWS(output_format_from_string("xml"));
}

}
