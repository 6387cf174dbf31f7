#include "rflab/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "rflab/errors.hpp"
#include "rflab/version.hpp"

namespace rflab {

using nlohmann::json;

std::string format_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

const char* kTrajectoryCsvHeader =
    "t,mu,E,F,N,sup_S,sup_H,sup_Rm,res_divfv,res_comm,res_sev,res_heq";

namespace {

std::string residual_or_empty(const DiagnosticsRecord& d, const char* key) {
  auto it = d.residuals.find(key);
  return it == d.residuals.end() ? std::string() : format_g17(it->second);
}

}  // namespace

std::string csv_row(const DiagnosticsRecord& d) {
  std::ostringstream os;
  os << format_g17(d.t) << ',' << format_g17(d.mu) << ',' << format_g17(d.E) << ','
     << format_g17(d.F) << ',' << (d.N ? format_g17(*d.N) : std::string()) << ','
     << format_g17(d.sup_S) << ',' << format_g17(d.sup_H) << ',' << format_g17(d.sup_Rm)
     << ',' << residual_or_empty(d, "divfv") << ',' << residual_or_empty(d, "comm") << ','
     << residual_or_empty(d, "sev") << ',' << residual_or_empty(d, "heq");
  return os.str();
}

std::string trajectory_csv_text(const std::vector<DiagnosticsRecord>& records) {
  std::ostringstream os;
  os << kTrajectoryCsvHeader << '\n';
  for (const auto& d : records) os << csv_row(d) << '\n';
  return os.str();
}

void write_trajectory_csv(const std::string& path, const std::vector<DiagnosticsRecord>& records) {
  write_text_file(path, trajectory_csv_text(records));
}

namespace {

json field_to_json(const std::vector<double>& v) {
  json arr = json::array();
  for (double x : v) arr.push_back(x);
  return arr;
}

std::vector<double> field_from_json(const json& j) {
  std::vector<double> v;
  v.reserve(j.size());
  for (const auto& x : j) v.push_back(x.get<double>());
  return v;
}

json state_to_json(const MetricState& s) {
  json j;
  if (auto* r = std::get_if<RoundFamilyState>(&s)) {
    j["kind"] = "round_family";
    j["n"] = r->n;
    j["sigma"] = r->sigma;
    j["c"] = r->c;
  } else if (auto* t = std::get_if<TorusGridState>(&s)) {
    j["kind"] = "torus_grid";
    j["N"] = t->N;
    j["L"] = t->L;
    j["stencil_order"] = t->stencil_order;
    j["sigma"] = t->sigma;
    j["fields"]["g11"] = field_to_json(t->g11);
    j["fields"]["g12"] = field_to_json(t->g12);
    j["fields"]["g22"] = field_to_json(t->g22);
  } else {
    const auto& a = std::get<AxisymSphereState>(s);
    j["kind"] = "axisym_sphere";
    j["M"] = a.M;
    j["stencil_order"] = a.stencil_order;
    j["sigma"] = a.sigma;
    j["fields"]["a"] = field_to_json(a.a);
    j["fields"]["beta"] = field_to_json(a.beta);
  }
  return j;
}

MetricState state_from_json(const json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "round_family")
    return RoundFamilyState(j.at("n").get<int>(), j.at("sigma").get<int>(),
                            j.at("c").get<double>());
  if (kind == "torus_grid")
    return TorusGridState(j.at("N").get<int>(), j.at("L").get<double>(),
                          field_from_json(j.at("fields").at("g11")),
                          field_from_json(j.at("fields").at("g12")),
                          field_from_json(j.at("fields").at("g22")),
                          j.at("stencil_order").get<int>());
  if (kind == "axisym_sphere")
    return AxisymSphereState(j.at("M").get<int>(), field_from_json(j.at("fields").at("a")),
                             field_from_json(j.at("fields").at("beta")),
                             j.at("stencil_order").get<int>());
  throw io_error("snapshot: unknown arena kind '" + kind + "'");
}

}  // namespace

void write_snapshot(const std::string& path, const Snapshot& snap) {
  json j;
  j["schema_version"] = kSnapshotSchemaVersion;
  j["record_index"] = snap.record_index;
  j["t"] = snap.record.t;
  j["arena"] = state_to_json(snap.record.state);
  j["f"] = field_to_json(snap.record.entropy.f.data);
  j["entropy"]["mu"] = snap.record.entropy.mu;
  j["entropy"]["el_residual"] = snap.record.entropy.el_residual;
  j["entropy"]["iterations"] = snap.record.entropy.iterations;
  j["entropy"]["floored"] = snap.record.entropy.floored;
  j["step_stats"]["accepted"] = snap.stats.accepted;
  j["step_stats"]["rejected"] = snap.stats.rejected;
  j["step_stats"]["max_pole_projection"] = snap.stats.max_pole_projection;
  if (snap.prev_t) {
    j["prev"]["t"] = *snap.prev_t;
    j["prev"]["arena"] = state_to_json(*snap.prev_state);
    j["prev"]["f"] = field_to_json(snap.prev_f->data);
  }
  write_text_file(path, j.dump(1));
}

Snapshot read_snapshot(const std::string& path) {
  json j = json::parse(read_text_file(path));
  const int ver = j.at("schema_version").get<int>();
  if (ver != kSnapshotSchemaVersion)
    throw io_error("snapshot: unknown schema version " + std::to_string(ver));
  Snapshot snap;
  snap.record_index = j.at("record_index").get<int>();
  snap.record.t = j.at("t").get<double>();
  snap.record.state = state_from_json(j.at("arena"));
  const FieldShape sh = field_shape(snap.record.state);
  snap.record.entropy.f = ScalarField(sh);
  snap.record.entropy.f.data = field_from_json(j.at("f"));
  if (static_cast<int>(snap.record.entropy.f.data.size()) != sh.nodes())
    throw io_error("snapshot: potential field size mismatch");
  snap.record.entropy.mu = j.at("entropy").at("mu").get<double>();
  snap.record.entropy.el_residual = j.at("entropy").at("el_residual").get<double>();
  snap.record.entropy.iterations = j.at("entropy").at("iterations").get<int>();
  snap.record.entropy.floored = j.at("entropy").at("floored").get<bool>();
  snap.stats.accepted = j.at("step_stats").at("accepted").get<long>();
  snap.stats.rejected = j.at("step_stats").at("rejected").get<long>();
  snap.stats.max_pole_projection = j.at("step_stats").at("max_pole_projection").get<double>();
  if (j.contains("prev")) {
    snap.prev_t = j.at("prev").at("t").get<double>();
    snap.prev_state = state_from_json(j.at("prev").at("arena"));
    ScalarField pf(field_shape(*snap.prev_state));
    pf.data = field_from_json(j.at("prev").at("f"));
    snap.prev_f = std::move(pf);
  }
  return snap;
}

void write_report_json(const std::string& path, const std::vector<BoundCheckReport>& reports) {
  json arr = json::array();
  for (const auto& r : reports) {
    json j;
    j["id"] = r.id;
    j["paper_ref"] = r.anchor;
    j["verdict"] = verdict_name(r.verdict);
    json fit = json::object();
    for (const auto& [k, v] : r.fitted) fit[k] = v;
    j["fitted_constants"] = fit;
    json margins = json::array();
    for (const auto& [t, m] : r.margins) margins.push_back(json::array({t, m}));
    j["margins"] = margins;
    j["notes"] = r.notes;
    arr.push_back(j);
  }
  write_text_file(path, arr.dump(1));
}

void write_plot_svg(const std::string& path, const std::string& title,
                    const std::vector<PlotSeries>& series) {
  const double W = 760, H = 480, ml = 70, mr = 20, mt = 40, mb = 50;
  double xlo = 1e300, xhi = -1e300, ylo = 1e300, yhi = -1e300;
  for (const auto& s : series)
    for (const auto& [x, y] : s.points) {
      if (!std::isfinite(x) || !std::isfinite(y)) continue;
      xlo = std::min(xlo, x);
      xhi = std::max(xhi, x);
      ylo = std::min(ylo, y);
      yhi = std::max(yhi, y);
    }
  if (xlo > xhi) {
    xlo = 0;
    xhi = 1;
  }
  if (ylo > yhi) {
    ylo = 0;
    yhi = 1;
  }
  if (xhi - xlo < 1e-300) xhi = xlo + 1;
  if (yhi - ylo < 1e-300) yhi = ylo + 1;
  auto px = [&](double x) { return ml + (x - xlo) / (xhi - xlo) * (W - ml - mr); };
  auto py = [&](double y) { return H - mb - (y - ylo) / (yhi - ylo) * (H - mt - mb); };

  std::ostringstream os;
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
     << "\" viewBox=\"0 0 " << W << " " << H << "\">\n";
  os << "<rect width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
  os << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">"
     << title << "</text>\n";
  // axes
  os << "<line x1=\"" << ml << "\" y1=\"" << H - mb << "\" x2=\"" << W - mr << "\" y2=\""
     << H - mb << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << H - mb
     << "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double x = xlo + k * (xhi - xlo) / 4;
    const double y = ylo + k * (yhi - ylo) / 4;
    os << "<text x=\"" << px(x) << "\" y=\"" << H - mb + 18
       << "\" text-anchor=\"middle\" font-size=\"11\">" << format_g17(x).substr(0, 9)
       << "</text>\n";
    os << "<text x=\"" << ml - 6 << "\" y=\"" << py(y) + 4
       << "\" text-anchor=\"end\" font-size=\"11\">" << format_g17(y).substr(0, 9)
       << "</text>\n";
  }
  const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd"};
  int ci = 0;
  for (const auto& s : series) {
    os << "<polyline fill=\"none\" stroke=\"" << colors[ci % 4] << "\" stroke-width=\"1.5\" points=\"";
    for (const auto& [x, y] : s.points)
      if (std::isfinite(x) && std::isfinite(y)) os << px(x) << ',' << py(y) << ' ';
    os << "\"/>\n";
    os << "<text x=\"" << W - mr - 8 << "\" y=\"" << mt + 16 + 16 * ci
       << "\" text-anchor=\"end\" font-size=\"12\" fill=\"" << colors[ci % 4] << "\">"
       << s.label << "</text>\n";
    ++ci;
  }
  os << "</svg>\n";
  write_text_file(path, os.str());
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open for reading: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw io_error("cannot open for writing: " + path);
  out << text;
  if (!out) throw io_error("write failed: " + path);
}

}  // namespace rflab
