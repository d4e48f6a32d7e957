// Copyright 2026 The streamdiar Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

// RTTM I/O and diarization scoring (DER with a forgiveness collar, JER).
// Scoring sweeps the exact boundary events of both timelines; no time grid.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "streamdiar/error.hpp"

namespace streamdiar {

struct Turn {
  double start = 0.0;
  double duration = 0.0;
  std::string speaker;

  double end() const { return start + duration; }
};

struct Timeline {
  std::string file_id;
  std::vector<Turn> turns;

  std::set<std::string> speakers() const {
    std::set<std::string> s;
    for (const auto& t : turns) s.insert(t.speaker);
    return s;
  }
};

using TimelineSet = std::map<std::string, Timeline>;

namespace detail {

inline bool parse_double(const std::string& s, double& out) {
  try {
    std::size_t pos = 0;
    out = std::stod(s, &pos);
    return pos == s.size() && std::isfinite(out);
  } catch (...) {
    return false;
  }
}

}  // namespace detail

/// Parses SPEAKER lines; blank and comment (#, ;;) lines are skipped.
inline TimelineSet parse_rttm(std::istream& is, const std::string& source = "<stream>") {
  TimelineSet out;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::vector<std::string> tok;
    for (std::string t; ls >> t;) tok.push_back(t);
    if (tok.empty() || tok[0].starts_with("#") || tok[0].starts_with(";;")) continue;
    auto bad = [&](const std::string& why) {
      fail(ErrorCategory::kFormat, source + ":" + std::to_string(lineno) + ": " + why);
    };
    if (tok[0] != "SPEAKER") bad("expected SPEAKER record");
    if (tok.size() < 8) bad("too few fields");
    double start = 0.0, dur = 0.0;
    if (!detail::parse_double(tok[3], start)) bad("bad onset '" + tok[3] + "'");
    if (!detail::parse_double(tok[4], dur)) bad("bad duration '" + tok[4] + "'");
    if (dur < 0.0) bad("negative duration");
    auto& tl = out[tok[1]];
    tl.file_id = tok[1];
    if (dur > 0.0) tl.turns.push_back({start, dur, tok[7]});
  }
  return out;
}

inline TimelineSet read_rttm(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) fail(ErrorCategory::kIo, "cannot open RTTM: " + path.string());
  return parse_rttm(is, path.string());
}

inline std::string format_rttm_line(const std::string& file_id, const Turn& t) {
  char buf[64];
  std::string line = "SPEAKER " + file_id + " 1 ";
  std::snprintf(buf, sizeof(buf), "%.3f %.3f", t.start, t.duration);
  line += buf;
  line += " <NA> <NA> " + t.speaker + " <NA> <NA>\n";
  return line;
}

/// Canonical form: 3-decimal times, sorted by (file_id, start, speaker).
inline void write_rttm(std::ostream& os, const TimelineSet& timelines) {
  for (const auto& [id, tl] : timelines) {
    auto turns = tl.turns;
    std::stable_sort(turns.begin(), turns.end(), [](const Turn& a, const Turn& b) {
      if (a.start != b.start) return a.start < b.start;
      return a.speaker < b.speaker;
    });
    for (const auto& t : turns) os << format_rttm_line(id, t);
  }
}

inline void write_rttm(const std::filesystem::path& path, const TimelineSet& timelines) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) fail(ErrorCategory::kIo, "cannot open for writing: " + path.string());
  write_rttm(os, timelines);
  if (!os) fail(ErrorCategory::kIo, "write failed: " + path.string());
}

/// Maximum-weight one-to-one assignment of rows to columns (Hungarian method).
/// Returns for each row the assigned column or -1. Pairs of zero weight are
/// reported unassigned.
inline std::vector<int> max_weight_assignment(const std::vector<std::vector<double>>& w) {
  const int rows = static_cast<int>(w.size());
  const int cols = rows ? static_cast<int>(w[0].size()) : 0;
  std::vector<int> result(static_cast<std::size_t>(rows), -1);
  if (rows == 0 || cols == 0) return result;
  const int n = std::max(rows, cols);
  double maxw = 0.0;
  for (const auto& r : w)
    for (double v : r) maxw = std::max(maxw, v);
  // cost[i][j] = maxw - w, padded with maxw (weight 0)
  std::vector<std::vector<double>> cost(static_cast<std::size_t>(n + 1), std::vector<double>(static_cast<std::size_t>(n + 1), maxw));
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) cost[static_cast<std::size_t>(i + 1)][static_cast<std::size_t>(j + 1)] = maxw - w[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];

  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(static_cast<std::size_t>(n + 1), 0.0), v(static_cast<std::size_t>(n + 1), 0.0);
  std::vector<int> p(static_cast<std::size_t>(n + 1), 0), way(static_cast<std::size_t>(n + 1), 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(static_cast<std::size_t>(n + 1), inf);
    std::vector<bool> used(static_cast<std::size_t>(n + 1), false);
    do {
      used[static_cast<std::size_t>(j0)] = true;
      const int i0 = p[static_cast<std::size_t>(j0)];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) continue;
        const double cur = cost[static_cast<std::size_t>(i0)][static_cast<std::size_t>(j)] - u[static_cast<std::size_t>(i0)] - v[static_cast<std::size_t>(j)];
        if (cur < minv[static_cast<std::size_t>(j)]) {
          minv[static_cast<std::size_t>(j)] = cur;
          way[static_cast<std::size_t>(j)] = j0;
        }
        if (minv[static_cast<std::size_t>(j)] < delta) {
          delta = minv[static_cast<std::size_t>(j)];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) {
          u[static_cast<std::size_t>(p[static_cast<std::size_t>(j)])] += delta;
          v[static_cast<std::size_t>(j)] -= delta;
        } else {
          minv[static_cast<std::size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (p[static_cast<std::size_t>(j0)] != 0);
    do {
      const int j1 = way[static_cast<std::size_t>(j0)];
      p[static_cast<std::size_t>(j0)] = p[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0);
  }
  for (int j = 1; j <= n; ++j) {
    const int i = p[static_cast<std::size_t>(j)];
    if (i >= 1 && i <= rows && j <= cols && w[static_cast<std::size_t>(i - 1)][static_cast<std::size_t>(j - 1)] > 0.0)
      result[static_cast<std::size_t>(i - 1)] = j - 1;
  }
  return result;
}

/// Elementary interval with the speakers active throughout it.
struct TimePiece {
  double duration = 0.0;
  std::vector<int> ref;  // indices into the sorted reference label list
  std::vector<int> hyp;
  bool in_collar = false;
};

struct PieceSet {
  std::vector<std::string> ref_labels;  // sorted
  std::vector<std::string> hyp_labels;  // sorted
  std::vector<TimePiece> pieces;
};

/// Sweeps all turn and collar boundaries.
inline PieceSet build_pieces(const Timeline& ref, const Timeline& hyp, double collar) {
  PieceSet ps;
  const auto rs = ref.speakers();
  const auto hs = hyp.speakers();
  ps.ref_labels.assign(rs.begin(), rs.end());
  ps.hyp_labels.assign(hs.begin(), hs.end());
  auto index_of = [](const std::vector<std::string>& v, const std::string& s) {
    return static_cast<int>(std::lower_bound(v.begin(), v.end(), s) - v.begin());
  };

  // kind: 0 ref, 1 hyp, 2 collar; delta +1 / -1
  struct Event {
    double t;
    int kind;
    int id;
    int delta;
  };
  std::vector<Event> ev;
  for (const auto& t : ref.turns) {
    const int id = index_of(ps.ref_labels, t.speaker);
    ev.push_back({t.start, 0, id, +1});
    ev.push_back({t.end(), 0, id, -1});
    if (collar > 0.0) {
      for (double b : {t.start, t.end()}) {
        ev.push_back({b - collar, 2, 0, +1});
        ev.push_back({b + collar, 2, 0, -1});
      }
    }
  }
  for (const auto& t : hyp.turns) {
    const int id = index_of(ps.hyp_labels, t.speaker);
    ev.push_back({t.start, 1, id, +1});
    ev.push_back({t.end(), 1, id, -1});
  }
  std::sort(ev.begin(), ev.end(), [](const Event& a, const Event& b) { return a.t < b.t; });

  std::vector<int> rc(ps.ref_labels.size(), 0), hc(ps.hyp_labels.size(), 0);
  int collar_depth = 0;
  for (std::size_t i = 0; i < ev.size();) {
    const double t = ev[i].t;
    for (; i < ev.size() && ev[i].t == t; ++i) {
      const auto& e = ev[i];
      if (e.kind == 0) rc[static_cast<std::size_t>(e.id)] += e.delta;
      else if (e.kind == 1) hc[static_cast<std::size_t>(e.id)] += e.delta;
      else collar_depth += e.delta;
    }
    if (i == ev.size()) break;
    const double dur = ev[i].t - t;
    if (dur <= 0.0) continue;
    TimePiece p;
    p.duration = dur;
    p.in_collar = collar_depth > 0;
    for (std::size_t k = 0; k < rc.size(); ++k)
      if (rc[k] > 0) p.ref.push_back(static_cast<int>(k));
    for (std::size_t k = 0; k < hc.size(); ++k)
      if (hc[k] > 0) p.hyp.push_back(static_cast<int>(k));
    if (p.ref.empty() && p.hyp.empty()) continue;
    ps.pieces.push_back(std::move(p));
  }
  return ps;
}

enum class CollarMode {
  kAllComponents,  // collar regions excluded from MS, FA and SC
  kKeepFalseAlarm, // collar regions still accumulate FA
};

struct DerOptions {
  double collar = 0.25;
  bool score_overlap = true;
  CollarMode collar_mode = CollarMode::kAllComponents;
};

struct DerReport {
  std::string file_id;
  double ms = 0.0;  // percent
  double fa = 0.0;
  double sc = 0.0;
  double der = 0.0;
  double scored_time = 0.0;  // seconds of scored reference speech (speaker-weighted)
  double ms_time = 0.0;
  double fa_time = 0.0;
  double sc_time = 0.0;
  std::vector<std::pair<std::string, std::string>> mapping;  // ref -> hyp
};

inline void fill_percentages(DerReport& r) {
  if (r.scored_time > 0.0) {
    r.ms = 100.0 * r.ms_time / r.scored_time;
    r.fa = 100.0 * r.fa_time / r.scored_time;
    r.sc = 100.0 * r.sc_time / r.scored_time;
  } else {
    r.ms = r.fa = r.sc = 0.0;
  }
  r.der = r.ms + r.fa + r.sc;
}

inline void check_same_file(const Timeline& ref, const Timeline& hyp) {
  if (!ref.file_id.empty() && !hyp.file_id.empty() && ref.file_id != hyp.file_id)
    fail(ErrorCategory::kData, "file id mismatch: reference '" + ref.file_id + "' vs hypothesis '" + hyp.file_id + "'");
}

inline DerReport score_der(const Timeline& ref, const Timeline& hyp, const DerOptions& opt = {}) {
  check_same_file(ref, hyp);
  if (opt.collar < 0.0) fail(ErrorCategory::kConfig, "collar must be >= 0");
  const auto ps = build_pieces(ref, hyp, opt.collar);
  auto scored = [&](const TimePiece& p) { return !p.in_collar && (opt.score_overlap || p.ref.size() <= 1); };

  std::vector<std::vector<double>> overlap(ps.ref_labels.size(), std::vector<double>(ps.hyp_labels.size(), 0.0));
  for (const auto& p : ps.pieces) {
    if (!scored(p)) continue;
    for (int r : p.ref)
      for (int h : p.hyp) overlap[static_cast<std::size_t>(r)][static_cast<std::size_t>(h)] += p.duration;
  }
  const auto assign = max_weight_assignment(overlap);

  DerReport rep;
  rep.file_id = ref.file_id.empty() ? hyp.file_id : ref.file_id;
  for (std::size_t r = 0; r < assign.size(); ++r)
    if (assign[r] >= 0) rep.mapping.emplace_back(ps.ref_labels[r], ps.hyp_labels[static_cast<std::size_t>(assign[r])]);

  for (const auto& p : ps.pieces) {
    const double nr = static_cast<double>(p.ref.size());
    const double nh = static_cast<double>(p.hyp.size());
    if (!scored(p)) {
      if (p.in_collar && opt.collar_mode == CollarMode::kKeepFalseAlarm && (opt.score_overlap || p.ref.size() <= 1))
        rep.fa_time += p.duration * std::max(nh - nr, 0.0);
      continue;
    }
    double correct = 0.0;
    for (int r : p.ref) {
      const int h = assign[static_cast<std::size_t>(r)];
      if (h >= 0 && std::binary_search(p.hyp.begin(), p.hyp.end(), h)) correct += 1.0;
    }
    rep.scored_time += p.duration * nr;
    rep.ms_time += p.duration * std::max(nr - nh, 0.0);
    rep.fa_time += p.duration * std::max(nh - nr, 0.0);
    rep.sc_time += p.duration * (std::min(nr, nh) - correct);
  }
  fill_percentages(rep);
  return rep;
}

/// Time-weighted pooling of per-file reports.
inline DerReport pool_reports(const std::vector<DerReport>& reports) {
  DerReport all;
  all.file_id = "ALL";
  for (const auto& r : reports) {
    all.scored_time += r.scored_time;
    all.ms_time += r.ms_time;
    all.fa_time += r.fa_time;
    all.sc_time += r.sc_time;
  }
  fill_percentages(all);
  return all;
}

struct JerOptions {
  double collar = 0.0;  // DIHARD convention: no collar
};

struct JerReport {
  double jer = 0.0;  // percent
  std::map<std::string, double> per_speaker;  // percent
  std::vector<std::pair<std::string, std::string>> mapping;
};

/// Mean over reference speakers of 1 - |ref ∩ hyp| / |ref ∪ hyp| under the
/// one-to-one mapping that maximizes total Jaccard index; unmapped reference
/// speakers score 100.
inline JerReport score_jer_detailed(const Timeline& ref, const Timeline& hyp, const JerOptions& opt = {}) {
  check_same_file(ref, hyp);
  const auto ps = build_pieces(ref, hyp, opt.collar);
  const auto nr = ps.ref_labels.size();
  const auto nh = ps.hyp_labels.size();
  std::vector<double> ref_time(nr, 0.0), hyp_time(nh, 0.0);
  std::vector<std::vector<double>> inter(nr, std::vector<double>(nh, 0.0));
  for (const auto& p : ps.pieces) {
    if (p.in_collar) continue;
    for (int r : p.ref) ref_time[static_cast<std::size_t>(r)] += p.duration;
    for (int h : p.hyp) hyp_time[static_cast<std::size_t>(h)] += p.duration;
    for (int r : p.ref)
      for (int h : p.hyp) inter[static_cast<std::size_t>(r)][static_cast<std::size_t>(h)] += p.duration;
  }
  std::vector<std::vector<double>> jacc(nr, std::vector<double>(nh, 0.0));
  for (std::size_t r = 0; r < nr; ++r)
    for (std::size_t h = 0; h < nh; ++h) {
      const double uni = ref_time[r] + hyp_time[h] - inter[r][h];
      jacc[r][h] = uni > 0.0 ? inter[r][h] / uni : 0.0;
    }
  const auto assign = max_weight_assignment(jacc);

  JerReport rep;
  if (nr == 0) {
    rep.jer = nh == 0 ? 0.0 : 100.0;
    return rep;
  }
  double sum = 0.0;
  for (std::size_t r = 0; r < nr; ++r) {
    double err = 100.0;
    if (assign[r] >= 0) {
      err = 100.0 * (1.0 - jacc[r][static_cast<std::size_t>(assign[r])]);
      rep.mapping.emplace_back(ps.ref_labels[r], ps.hyp_labels[static_cast<std::size_t>(assign[r])]);
    }
    rep.per_speaker[ps.ref_labels[r]] = err;
    sum += err;
  }
  rep.jer = sum / static_cast<double>(nr);
  return rep;
}

inline double score_jer(const Timeline& ref, const Timeline& hyp, const JerOptions& opt = {}) {
  return score_jer_detailed(ref, hyp, opt).jer;
}

}  // namespace streamdiar
