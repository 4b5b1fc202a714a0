#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <string>

#include "fjsp/core/instance.hpp"
#include "fjsp/sim/schedule.hpp"

namespace fjsp::bench {

namespace detail {
// Evenly spread hues so neighbouring job ids differ clearly.
inline std::string job_color(int job) {
  const double hue = std::fmod(job * 137.508, 360.0);
  char buf[32];
  std::snprintf(buf, sizeof buf, "hsl(%.1f,65%%,60%%)", hue);
  return buf;
}
}  // namespace detail

struct GanttStyle {
  double width = 960;   // drawing width of the time axis
  double lane = 28;     // lane height
  double margin = 60;   // left label column
  double top = 40;
};

/// SVG Gantt chart: one lane per machine, one rect per operation. Each rect
/// carries data-job/op/machine/start/end attributes.
inline std::string gantt_svg(const Schedule& sched, const FjspInstance& inst, const GanttStyle& st = {}) {
  const int m = inst.n_machines();
  const double span = static_cast<double>(std::max<Time>(sched.makespan, 1));
  const double sx = st.width / span;
  const double height = st.top + m * st.lane + 30;
  std::ostringstream out;
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << st.margin + st.width + 20
      << "\" height=\"" << height << "\">\n"
      << "<title>Schedule, makespan " << sched.makespan << "</title>\n"
      << "<text x=\"" << st.margin << "\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\">makespan "
      << sched.makespan << "</text>\n";
  for (int k = 0; k < m; ++k) {
    const double y = st.top + k * st.lane;
    out << "<g class=\"lane\" data-machine=\"" << k << "\">\n"
        << "<text x=\"4\" y=\"" << y + st.lane * 0.65 << "\" font-family=\"sans-serif\" font-size=\"12\">M" << k + 1
        << "</text>\n"
        << "<line x1=\"" << st.margin << "\" y1=\"" << y + st.lane << "\" x2=\"" << st.margin + st.width << "\" y2=\""
        << y + st.lane << "\" stroke=\"#ddd\"/>\n";
    for (const auto& op : sched.ops) {
      if (op.machine != k) continue;
      out << "<rect x=\"" << st.margin + static_cast<double>(op.start) * sx << "\" y=\"" << y + 3 << "\" width=\""
          << static_cast<double>(op.end - op.start) * sx << "\" height=\"" << st.lane - 6 << "\" fill=\""
          << detail::job_color(op.job) << "\" stroke=\"#333\" data-job=\"" << op.job << "\" data-op=\"" << op.op
          << "\" data-machine=\"" << op.machine << "\" data-start=\"" << op.start << "\" data-end=\"" << op.end
          << "\"><title>J" << op.job + 1 << " O" << op.op + 1 << " [" << op.start << ", " << op.end
          << ")</title></rect>\n";
    }
    out << "</g>\n";
  }
  out << "</svg>\n";
  return out.str();
}

}  // namespace fjsp::bench
