// Copyright 2026 The avsr Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cstdio>
#include <numeric>

#include "avsr/error.hpp"
#include "avsr/resources.hpp"
#include "json.hpp"

namespace avsr {

std::uint64_t fc_macs(std::uint64_t in, std::uint64_t out) { return out * (in + 1); }

std::uint64_t lstm_macs(std::uint64_t in, std::uint64_t hidden) { return 4 * hidden * (in + hidden + 1); }

std::uint64_t conv_macs(std::uint64_t in_channels, std::uint64_t out_channels, std::uint64_t kernel,
                        std::uint64_t out_h, std::uint64_t out_w) {
  return out_channels * out_h * out_w * (in_channels * kernel * kernel + 1);
}

namespace {

class Census {
 public:
  explicit Census(ResourceReport& r) : r_(r) {}

  void fc(const std::string& name, const std::string& path, std::uint64_t in, std::uint64_t out) {
    add(name, path, fc_macs(in, out), fc_macs(in, out));
  }

  // Returns the per-frame output width.
  std::uint64_t bilstm_stack(const std::string& prefix, const std::string& path, std::uint64_t in,
                             std::uint64_t layers, std::uint64_t hidden) {
    for (std::uint64_t l = 0; l < layers; ++l) {
      const std::uint64_t m = 2 * lstm_macs(l ? hidden : in, hidden);
      add(prefix + "lstm" + std::to_string(l), path, m, m);
    }
    return hidden;
  }

  std::uint64_t head(const std::string& prefix, const std::string& path, std::uint64_t in,
                     const std::vector<std::size_t>& widths, std::uint64_t classes) {
    for (std::size_t i = 0; i < widths.size(); ++i) {
      fc(prefix + "head" + std::to_string(i), path, in, widths[i]);
      in = widths[i];
    }
    fc(prefix + "out", path, in, classes);
    return classes;
  }

  void acoustic(const ModelConfig& c, const std::string& p) {
    const std::uint64_t h = bilstm_stack(p, "audio", c.input_dim, c.layers, c.hidden);
    head(p, "audio", h, c.head, c.class_count);
  }

  void visual(const ModelConfig& c, const std::string& p) {
    std::uint64_t channels = 1, size = c.image_size;
    for (std::size_t i = 0; i < c.conv_stack.size(); ++i) {
      const StackOp& op = c.conv_stack[i];
      if (op.kind == StackOp::Kind::conv) {
        size = conv_output_extent(size, op.kernel, op.stride, op.padding);
        add(p + "conv" + std::to_string(i), "image", conv_macs(channels, op.channels, op.kernel, size, size),
            op.channels * (channels * op.kernel * op.kernel + 1));
        channels = op.channels;
      } else if (op.kind == StackOp::Kind::pool) {
        size = conv_output_extent(size, op.kernel, op.stride, 0);
        add(p + "pool" + std::to_string(i), "image", 0, 0);
      } else {
        throw ParameterError("census: unknown layer kind in the visual front-end");
      }
    }
    std::uint64_t width = channels * size * size;
    if (c.use_fc_bottleneck) {
      fc(p + "bottleneck", "image", width, c.bottleneck_width);
      width = c.bottleneck_width;
    }
    const std::uint64_t h = bilstm_stack(p, "image", width, c.layers, c.hidden);
    head(p, "image", h, c.head, c.class_count);
  }

 private:
  void add(const std::string& name, const std::string& path, std::uint64_t macs, std::uint64_t params) {
    r_.layers.push_back({name, path, macs, params});
    (path == "audio" ? r_.macs_per_audio_frame : r_.macs_per_image) += macs;
    r_.param_count += params;
  }

  ResourceReport& r_;
};

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

}  // namespace

ResourceReport count_resources(const ModelConfig& config) {
  config.validate();
  ResourceReport r;
  Census c(r);
  switch (config.modality) {
    case Modality::dense: {
      std::uint64_t in = config.input_dim;
      for (std::size_t i = 0; i < config.widths.size(); ++i) {
        c.fc("fc" + std::to_string(i), "audio", in, config.widths[i]);
        in = config.widths[i];
      }
      break;
    }
    case Modality::acoustic: c.acoustic(config, ""); break;
    case Modality::visual: c.visual(config, ""); break;
    case Modality::audiovisual:
    case Modality::audiovisual_attention: {
      c.acoustic(*config.acoustic, "acoustic.");
      c.visual(*config.visual, "visual.");
      const std::uint64_t fused = config.acoustic->output_size() + config.visual->output_size();
      if (config.modality == Modality::audiovisual_attention) {
        std::uint64_t in = fused;
        for (std::size_t i = 0; i < config.attention.size(); ++i) {
          c.fc("attention.h" + std::to_string(i), "image", in, config.attention[i]);
          in = config.attention[i];
        }
        c.fc("attention.out", "image", in, 2);
      }
      c.head("fusion.", "image", fused, config.head, config.class_count);
      break;
    }
    default: throw ParameterError("census: unknown modality");
  }
  return r;
}

ResourceReport count_resources(const ModelGraph& graph) {
  ResourceReport r = count_resources(graph.config);
  if (r.param_count != graph.param_count()) {
    throw ConfigMismatchError("graph parameters (" + std::to_string(graph.param_count()) +
                              ") differ from its config census (" + std::to_string(r.param_count) + ")");
  }
  return r;
}

InstrumentedOutput instrumented_forward(const ModelGraph& graph, const Example& ex) {
  CountingMac audio, image;
  InstrumentedOutput out;
  out.output = forward_counted(graph, ex, audio, image);
  out.audio_macs = audio.count;
  out.image_macs = image.count;
  out.audio_frames = ex.audio.rank() == 2 ? ex.audio.dim(0) : 0;
  out.images = ex.images.rank() == 3 ? ex.images.dim(0) : 0;
  return out;
}

std::string resource_report_json(const ResourceReport& r, const ModelConfig& config) {
  nlohmann::ordered_json j;
  j["schema_version"] = 1;
  j["modality"] = modality_name(config.modality);
  j["config"] = config.to_text();
  j["macs_per_audio_frame"] = r.macs_per_audio_frame;
  j["macs_per_image"] = r.macs_per_image;
  j["flops_per_audio_frame"] = r.flops_per_audio_frame();
  j["flops_per_image"] = r.flops_per_image();
  j["param_count"] = r.param_count;
  j["size_bytes"] = r.size_bytes();
  j["size_megabytes"] = r.size_megabytes();
  j["audio_frames_per_second"] = kAudioFramesPerSecond;
  j["images_per_second"] = kImagesPerSecond;
  j["flops_per_second"] = r.flops_per_second();
  j["conventions"] = convention_ledger();
  j["layers"] = nlohmann::ordered_json::array();
  for (const auto& l : r.layers) {
    j["layers"].push_back({{"name", l.name}, {"path", l.path}, {"macs", l.macs}, {"params", l.params}});
  }
  return j.dump(2) + "\n";
}

std::string resource_report_table(const ResourceReport& r) {
  std::string out;
  char line[160];
  std::snprintf(line, sizeof line, "%-28s %-6s %14s %12s\n", "layer", "path", "MACs", "params");
  out += line;
  for (const auto& l : r.layers) {
    std::snprintf(line, sizeof line, "%-28s %-6s %14llu %12llu\n", l.name.c_str(), l.path.c_str(),
                  static_cast<unsigned long long>(l.macs), static_cast<unsigned long long>(l.params));
    out += line;
  }
  std::snprintf(line, sizeof line, "MACs per audio frame  %llu (FLOP %llu)\n",
                static_cast<unsigned long long>(r.macs_per_audio_frame),
                static_cast<unsigned long long>(r.flops_per_audio_frame()));
  out += line;
  std::snprintf(line, sizeof line, "MACs per image        %llu (FLOP %llu)\n",
                static_cast<unsigned long long>(r.macs_per_image), static_cast<unsigned long long>(r.flops_per_image()));
  out += line;
  std::snprintf(line, sizeof line, "parameters            %llu (%llu bytes, %.4g MB)\n",
                static_cast<unsigned long long>(r.param_count), static_cast<unsigned long long>(r.size_bytes()),
                r.size_megabytes());
  out += line;
  out += "FLOP per second       " + fmt("%.6g", r.flops_per_second()) + " (100 audio frames/s, 30 images/s)\n";
  return out;
}

const std::vector<PublishedCost>& published_costs() {
  static const std::vector<PublishedCost> rows = {
      {"acoustic", "audio frame", 1.49e7, 44.5},
      {"visual", "image", 1.08e9, 132.9},
      {"audiovisual", "image", 1.12e9, 134.9},
      {"audiovisual_attention", "image", 1.12e9, 137.4},
  };
  return rows;
}

const std::vector<std::string>& convention_ledger() {
  static const std::vector<std::string> rows = {
      "1 MAC = 2 FLOP",
      "every weight and every bias costs one MAC per application",
      "activations, softmax, max pooling and stream gating cost 0",
      "size = 4 bytes per parameter (float32 storage)",
      "1 MB = 10^6 bytes",
      "acoustic-path MACs are per 10 ms audio frame",
      "visual, attention and fusion MACs are per image",
      "FLOP per second assume 100 audio frames/s and 30 images/s",
  };
  return rows;
}

std::string discrepancy_report(const ResourceReport& ours, const PublishedCost& published) {
  const bool per_image = published.unit == "image";
  const double our_flops = static_cast<double>(per_image ? ours.flops_per_image() : ours.flops_per_audio_frame());
  std::string out = "network: " + published.network + "\n";
  char line[200];
  std::snprintf(line, sizeof line, "%-22s %18s %18s %10s\n", "quantity", "ours", "published", "ratio");
  out += line;
  std::snprintf(line, sizeof line, "%-22s %18.6g %18.6g %10.4g\n", ("FLOP per " + published.unit).c_str(),
                our_flops, published.flops_per_unit, our_flops / published.flops_per_unit);
  out += line;
  std::snprintf(line, sizeof line, "%-22s %18.6g %18.6g %10.4g\n", "size (MB)", ours.size_megabytes(),
                published.size_megabytes, ours.size_megabytes() / published.size_megabytes);
  out += line;
  std::snprintf(line, sizeof line, "%-22s %18llu\n", "parameters", static_cast<unsigned long long>(ours.param_count));
  out += line;
  out += "conventions:\n";
  for (const auto& c : convention_ledger()) out += "  - " + c + "\n";
  out += "The published figures follow counting assumptions that are not fully stated; no agreement is asserted.\n";
  return out;
}

bool dominates(const ParetoPoint& a, const ParetoPoint& b) {
  return a.accuracy >= b.accuracy && a.flops <= b.flops && (a.accuracy > b.accuracy || a.flops < b.flops);
}

std::vector<std::size_t> pareto_frontier(const std::vector<ParetoPoint>& points) {
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < points.size(); ++i)
    if (points[i].ok) order.push_back(i);
  // Cheapest first, most accurate first within equal cost.
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    if (points[x].flops != points[y].flops) return points[x].flops < points[y].flops;
    return points[x].accuracy > points[y].accuracy;
  });
  std::vector<std::size_t> front;
  double best_cheaper = -std::numeric_limits<double>::infinity();
  for (std::size_t g = 0; g < order.size();) {
    std::size_t end = g;
    while (end < order.size() && points[order[end]].flops == points[order[g]].flops) ++end;
    const double group_best = points[order[g]].accuracy;
    for (std::size_t k = g; k < end; ++k) {
      const double acc = points[order[k]].accuracy;
      if (acc > best_cheaper && acc == group_best) front.push_back(order[k]);
    }
    best_cheaper = std::max(best_cheaper, group_best);
    g = end;
  }
  std::sort(front.begin(), front.end());
  return front;
}

SweepResult pareto_sweep(const std::vector<std::pair<std::string, ModelConfig>>& grid, const SweepRunner& runner) {
  if (grid.empty()) throw ParameterError("pareto_sweep: empty grid");
  SweepResult r;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    ParetoPoint p;
    p.label = grid[i].first;
    p.config = grid[i].second;
    try {
      const ResourceReport cost = count_resources(p.config);
      p.flops = cost.flops_per_second();
      p.size_bytes = cost.size_bytes();
      p.accuracy = runner(p.config, i);
    } catch (const std::exception& e) {
      p.ok = false;
      p.error = e.what();
    }
    r.points.push_back(std::move(p));
  }
  r.frontier = pareto_frontier(r.points);
  return r;
}

std::string sweep_csv(const SweepResult& r) {
  std::string out = "label,layers,hidden,modality,accuracy,flops_per_second,size_bytes,ok,error,frontier\n";
  for (std::size_t i = 0; i < r.points.size(); ++i) {
    const ParetoPoint& p = r.points[i];
    const bool front = std::find(r.frontier.begin(), r.frontier.end(), i) != r.frontier.end();
    std::string err = p.error;
    std::replace(err.begin(), err.end(), ',', ';');
    std::replace(err.begin(), err.end(), '\n', ' ');
    out += p.label + "," + std::to_string(p.config.layers) + "," + std::to_string(p.config.hidden) + "," +
           modality_name(p.config.modality) + "," + fmt("%.10g", p.accuracy) + "," + fmt("%.10g", p.flops) + "," +
           std::to_string(p.size_bytes) + "," + (p.ok ? "1" : "0") + "," + err + "," + (front ? "1" : "0") + "\n";
  }
  return out;
}

}  // namespace avsr
