// Copyright 2026 The cotpcc Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include "cotpcc/rd.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "cotpcc/errors.hpp"

namespace cotpcc {
namespace {

std::string format_number(double v) {
  std::array<char, 64> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

double parse_number(const std::string& field, std::size_t line, const std::string& column) {
  double v = 0.0;
  const char* end = field.data() + field.size();
  const auto res = std::from_chars(field.data(), end, v);
  if (res.ec != std::errc() || res.ptr != end || !std::isfinite(v)) {
    throw ParseError("RD CSV line " + std::to_string(line) + ": bad " + column + " value '" + field + "'");
  }
  return v;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) {
    const auto b = field.find_first_not_of(" \t\r");
    const auto e = field.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? std::string() : field.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string escape_xml(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

// Round tick step: 1, 2 or 5 times a power of ten.
double nice_step(double span, int ticks) {
  const double raw = span / ticks;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    if (m * mag >= raw) return m * mag;
  }
  return 10.0 * mag;
}

struct Panel {
  double x0, y0, w, h;
};

void draw_panel(std::ostringstream& svg, const Panel& p, std::span<const RDCurve> curves, bool psnr,
                const std::string& ylabel) {
  static constexpr std::array<const char*, 8> kColors{"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                                      "#9467bd", "#8c564b", "#e377c2", "#17becf"};
  double xmin = INFINITY, xmax = -INFINITY, ymin = INFINITY, ymax = -INFINITY;
  for (const auto& c : curves) {
    for (const auto& r : c.points) {
      const double y = psnr ? r.psnr_db : r.cd_e3;
      xmin = std::min(xmin, r.bpp);
      xmax = std::max(xmax, r.bpp);
      ymin = std::min(ymin, y);
      ymax = std::max(ymax, y);
    }
  }
  const auto widen = [](double& lo, double& hi) {
    if (hi - lo < 1e-12) {
      lo -= 0.5;
      hi += 0.5;
    }
    const double pad = 0.05 * (hi - lo);
    lo -= pad;
    hi += pad;
  };
  widen(xmin, xmax);
  widen(ymin, ymax);
  const double left = p.x0 + 60, right = p.x0 + p.w - 15, top = p.y0 + 20, bottom = p.y0 + p.h - 45;
  const auto sx = [&](double x) { return left + (x - xmin) / (xmax - xmin) * (right - left); };
  const auto sy = [&](double y) { return bottom - (y - ymin) / (ymax - ymin) * (bottom - top); };

  svg << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << right - left << "\" height=\"" << bottom - top
      << "\" fill=\"none\" stroke=\"#444\"/>\n";
  const double xs = nice_step(xmax - xmin, 5), ys = nice_step(ymax - ymin, 5);
  for (double t = std::ceil(xmin / xs) * xs; t <= xmax; t += xs) {
    svg << "<line x1=\"" << sx(t) << "\" y1=\"" << bottom << "\" x2=\"" << sx(t) << "\" y2=\"" << bottom + 5
        << "\" stroke=\"#444\"/><text x=\"" << sx(t) << "\" y=\"" << bottom + 18
        << "\" font-size=\"11\" text-anchor=\"middle\">" << format_number(std::round(t / xs) * xs) << "</text>\n";
  }
  for (double t = std::ceil(ymin / ys) * ys; t <= ymax; t += ys) {
    svg << "<line x1=\"" << left - 5 << "\" y1=\"" << sy(t) << "\" x2=\"" << left << "\" y2=\"" << sy(t)
        << "\" stroke=\"#444\"/><text x=\"" << left - 8 << "\" y=\"" << sy(t) + 4
        << "\" font-size=\"11\" text-anchor=\"end\">" << format_number(std::round(t / ys) * ys) << "</text>\n";
  }
  svg << "<text x=\"" << (left + right) / 2 << "\" y=\"" << bottom + 36
      << "\" font-size=\"12\" text-anchor=\"middle\">Bpp</text>\n";
  svg << "<text x=\"" << p.x0 + 14 << "\" y=\"" << (top + bottom) / 2 << "\" font-size=\"12\" text-anchor=\"middle\" "
      << "transform=\"rotate(-90 " << p.x0 + 14 << ' ' << (top + bottom) / 2 << ")\">" << ylabel << "</text>\n";

  for (std::size_t i = 0; i < curves.size(); ++i) {
    const char* color = kColors[i % kColors.size()];
    svg << "<polyline class=\"curve\" data-model=\"" << escape_xml(curves[i].model) << "\" fill=\"none\" stroke=\""
        << color << "\" stroke-width=\"2\" points=\"";
    for (const auto& r : curves[i].points) svg << sx(r.bpp) << ',' << sy(psnr ? r.psnr_db : r.cd_e3) << ' ';
    svg << "\"/>\n";
    for (const auto& r : curves[i].points) {
      svg << "<circle cx=\"" << sx(r.bpp) << "\" cy=\"" << sy(psnr ? r.psnr_db : r.cd_e3) << "\" r=\"3\" fill=\""
          << color << "\"/>\n";
    }
    svg << "<text x=\"" << left + 10 << "\" y=\"" << top + 16 + 15 * static_cast<double>(i) << "\" font-size=\"11\" fill=\""
        << color << "\">" << escape_xml(curves[i].model) << "</text>\n";
  }
}

}  // namespace

void write_rd_csv(std::ostream& out, std::span<const RDRecord> records) {
  out << kRdCsvVersionLine << '\n' << kRdCsvHeader << '\n';
  for (const auto& r : records) {
    if (r.model.empty() || r.model.find_first_of(",\"\n\r") != std::string::npos) {
      throw InvalidArgument("RD CSV: model name '" + r.model + "' is empty or contains a separator");
    }
    out << r.model << ',' << format_number(r.lambda) << ',' << format_number(r.bpp) << ','
        << format_number(r.cd_e3) << ',' << format_number(r.psnr_db) << '\n';
  }
}

void write_rd_csv(const std::filesystem::path& path, std::span<const RDRecord> records) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  write_rd_csv(out, records);
}

std::vector<RDRecord> read_rd_csv(std::istream& in) {
  static const std::array<std::string, 5> kColumns{"model", "lambda", "bpp", "cd_e3", "psnr_db"};
  std::string line;
  std::size_t line_no = 0;
  std::vector<int> position;  // column slot -> field index
  std::vector<RDRecord> out;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (line.rfind("#cotpcc-rd-csv", 0) == 0 && line != kRdCsvVersionLine) {
        throw ParseError("RD CSV line " + std::to_string(line_no) + ": unsupported version '" + line + "'");
      }
      continue;
    }
    const auto fields = split(line);
    if (position.empty()) {
      position.assign(kColumns.size(), -1);
      for (std::size_t f = 0; f < fields.size(); ++f) {
        const auto it = std::find(kColumns.begin(), kColumns.end(), fields[f]);
        if (it == kColumns.end()) {
          throw ParseError("RD CSV: unknown column '" + fields[f] + "' (expected " + kRdCsvHeader + ")");
        }
        auto& slot = position[static_cast<std::size_t>(it - kColumns.begin())];
        if (slot >= 0) throw ParseError("RD CSV: duplicate column '" + fields[f] + "'");
        slot = static_cast<int>(f);
      }
      for (std::size_t c = 0; c < kColumns.size(); ++c) {
        if (position[c] < 0) throw ParseError("RD CSV: missing column '" + kColumns[c] + "'");
      }
      continue;
    }
    if (fields.size() != kColumns.size()) {
      throw ParseError("RD CSV line " + std::to_string(line_no) + ": expected " + std::to_string(kColumns.size()) +
                       " fields, found " + std::to_string(fields.size()));
    }
    RDRecord r;
    r.model = fields[static_cast<std::size_t>(position[0])];
    if (r.model.empty()) throw ParseError("RD CSV line " + std::to_string(line_no) + ": empty model name");
    r.lambda = parse_number(fields[static_cast<std::size_t>(position[1])], line_no, "lambda");
    r.bpp = parse_number(fields[static_cast<std::size_t>(position[2])], line_no, "bpp");
    r.cd_e3 = parse_number(fields[static_cast<std::size_t>(position[3])], line_no, "cd_e3");
    r.psnr_db = parse_number(fields[static_cast<std::size_t>(position[4])], line_no, "psnr_db");
    out.push_back(std::move(r));
  }
  if (position.empty()) throw ParseError("RD CSV: missing header line");
  return out;
}

std::vector<RDRecord> read_rd_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return read_rd_csv(in);
}

std::vector<RDCurve> rd_curves(std::span<const RDRecord> records) {
  std::vector<RDCurve> curves;
  std::map<std::string, std::size_t> slot;
  std::set<std::pair<std::string, double>> seen;
  for (const auto& r : records) {
    if (!seen.emplace(r.model, r.lambda).second) {
      throw InvalidArgument("duplicate RD point (model " + r.model + ", lambda " + format_number(r.lambda) + ")");
    }
    const auto [it, inserted] = slot.emplace(r.model, curves.size());
    if (inserted) curves.push_back({r.model, {}});
    curves[it->second].points.push_back(r);
  }
  if (curves.empty()) throw InvalidArgument("no RD points");
  for (auto& c : curves) {
    if (c.points.size() < 2) {
      throw InvalidArgument("model " + c.model + " has fewer than 2 RD points; a curve needs at least 2");
    }
    std::stable_sort(c.points.begin(), c.points.end(),
                     [](const RDRecord& a, const RDRecord& b) { return a.bpp < b.bpp; });
  }
  return curves;
}

std::string render_rd_svg(std::span<const RDCurve> curves) {
  std::ostringstream svg;
  svg.precision(6);
  const double w = 480, h = 360;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << 2 * w << "\" height=\"" << h
      << "\" font-family=\"sans-serif\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  draw_panel(svg, {0, 0, w, h}, curves, false, "CD (x1e-3)");
  draw_panel(svg, {w, 0, w, h}, curves, true, "PSNR (dB)");
  svg << "</svg>\n";
  return svg.str();
}

void write_rd_plot(const std::filesystem::path& path, std::span<const RDRecord> records) {
  const auto curves = rd_curves(records);
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << render_rd_svg(curves);
}

}  // namespace cotpcc
