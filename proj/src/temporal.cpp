// SPDX-License-Identifier: Apache-2.0

#include "avsr/temporal.hpp"

#include <sstream>

#include "avsr/error.hpp"

namespace avsr {

TCNBlock::TCNBlock(int64_t channels, int64_t kernel, int64_t dilation,
                   double dropout_p)
    : channels_(channels) {
  nn::ConvSpec spec;
  spec.causal = true;
  spec.dilation = dilation;
  conv1_ = std::make_unique<nn::WNConv1dLayer>(channels, channels, kernel, spec);
  conv2_ = std::make_unique<nn::WNConv1dLayer>(channels, channels, kernel, spec);
  drop1_ = std::make_unique<nn::SpatialDropout>(dropout_p);
  drop2_ = std::make_unique<nn::SpatialDropout>(dropout_p);
  register_module("conv1", *conv1_);
  register_module("conv2", *conv2_);
  register_module("drop1", *drop1_);
  register_module("drop2", *drop2_);
}

Tensor TCNBlock::forward(const Tensor& x) {
  if (x.dim(0) != channels_)
    throw ConfigError("tcn block: " + std::to_string(x.dim(0)) +
                      " channels do not match skip width " + std::to_string(channels_));
  Tensor h = drop1_->forward(ops::relu(conv1_->forward(x)));
  h = drop2_->forward(ops::relu(conv2_->forward(h)));
  return ops::add(x, h);
}

ResNet1DBlock::ResNet1DBlock(int64_t in_ch, int64_t out_ch, int64_t kernel,
                             int64_t stride) {
  nn::ConvSpec dspec;
  dspec.groups = in_ch;
  dspec.stride = stride;
  dspec.pad_lo = (kernel - 1) / 2;
  dspec.pad_hi = kernel - 1 - dspec.pad_lo;
  depth_ = std::make_unique<nn::Conv1dLayer>(in_ch, in_ch, kernel, dspec);
  point_ = std::make_unique<nn::Conv1dLayer>(in_ch, out_ch, 1, nn::ConvSpec{});
  bn_ = std::make_unique<nn::BatchNorm>(out_ch);
  register_module("depthwise", *depth_);
  register_module("pointwise", *point_);
  register_module("bn", *bn_);
  if (stride != 1 || in_ch != out_ch) {
    nn::ConvSpec pspec;
    pspec.stride = stride;
    proj_ = std::make_unique<nn::Conv1dLayer>(in_ch, out_ch, 1, pspec);
    register_module("proj", *proj_);
  }
}

Tensor ResNet1DBlock::forward(const Tensor& x) {
  Tensor h = ops::relu(bn_->forward(point_->forward(depth_->forward(x))));
  Tensor skip = proj_ ? proj_->forward(x) : x;
  return ops::add(skip, h);
}

// ---------------------------------------------------------------------------
// StreamSpec

namespace {

StreamRow parse_row(const std::string& text) {
  std::istringstream is(text);
  std::string head;
  is >> head;
  const auto colon = head.find(':');
  if (colon == std::string::npos)
    throw ConfigError("stream row '" + text + "': expected kind:filters");
  const std::string kind = head.substr(0, colon);
  StreamRow row;
  row.filters = std::stoll(head.substr(colon + 1));
  if (kind == "fc") {
    row.kind = StreamRow::Kind::kFc;
  } else if (kind == "block") {
    row.kind = StreamRow::Kind::kBlock;
    row.kernel = 5;
  } else if (kind == "up") {
    row.kind = StreamRow::Kind::kUp;
    row.kernel = 5;
    row.stride = 2;
    row.fractional = true;
  } else if (kind == "tcn") {
    row.kind = StreamRow::Kind::kTcn;
    row.kernel = 3;
    row.n_blocks = 3;
  } else {
    throw ConfigError("stream row '" + text + "': unknown kind '" + kind + "'");
  }
  std::string opt;
  while (is >> opt) {
    if (opt.size() < 2) throw ConfigError("stream row '" + text + "': bad option");
    const int64_t v = std::stoll(opt.substr(1));
    switch (opt[0]) {
      case 'k':
        row.kernel = v;
        break;
      case 'x':
        row.stride = v;
        break;
      case 's':
        row.stride = v;
        break;
      case 'n':
        row.n_blocks = v;
        break;
      default:
        throw ConfigError("stream row '" + text + "': unknown option '" + opt + "'");
    }
  }
  if (row.filters < 1) throw ConfigError("stream row '" + text + "': bad filter count");
  return row;
}

}  // namespace

StreamSpec StreamSpec::parse(const std::string& text) {
  StreamSpec spec;
  std::string body = text;
  // optional leading unit tag: "tcn|" or "1drn|"
  const auto bar = body.find('|');
  if (bar != std::string::npos) {
    const std::string unit = body.substr(0, bar);
    if (unit == "tcn")
      spec.unit = Unit::kTcn;
    else if (unit == "1drn")
      spec.unit = Unit::kResnet1d;
    else
      throw ConfigError("stream spec: unknown unit '" + unit + "'");
    body = body.substr(bar + 1);
  }
  std::istringstream is(body);
  std::string row;
  while (std::getline(is, row, ';')) {
    const auto first = row.find_first_not_of(" \t");
    if (first == std::string::npos) continue;
    spec.rows.push_back(parse_row(row.substr(first)));
  }
  if (spec.rows.empty()) throw ConfigError("stream spec: no rows in '" + text + "'");
  return spec;
}

std::string StreamSpec::to_string() const {
  std::ostringstream os;
  os << (unit == Unit::kTcn ? "tcn|" : "1drn|");
  for (size_t i = 0; i < rows.size(); ++i) {
    const StreamRow& r = rows[i];
    if (i) os << "; ";
    switch (r.kind) {
      case StreamRow::Kind::kFc:
        os << "fc:" << r.filters;
        break;
      case StreamRow::Kind::kBlock:
        os << "block:" << r.filters << " k" << r.kernel;
        break;
      case StreamRow::Kind::kUp:
        os << "up:" << r.filters << " k" << r.kernel << " x" << r.stride;
        break;
      case StreamRow::Kind::kTcn:
        os << "tcn:" << r.filters << " k" << r.kernel << " n" << r.n_blocks;
        break;
    }
  }
  return os.str();
}

// t_in is the input length in units of T (1 for video streams, 4 for audio).
std::string StreamSpec::table(int64_t t_in) const {
  std::ostringstream os;
  os << "Layer      #filters   K    S     P    Out\n";
  int64_t t = t_in;
  int fc = 0, conv = 0, tcn = 0;
  for (const StreamRow& r : rows) {
    std::string name, s = std::to_string(r.stride);
    int64_t pad = 0;
    switch (r.kind) {
      case StreamRow::Kind::kFc:
        name = "fc" + std::to_string(fc++);
        s = "1";
        break;
      case StreamRow::Kind::kBlock:
        name = "conv" + std::to_string(conv++);
        pad = (r.kernel - 1) / 2;
        break;
      case StreamRow::Kind::kUp:
        name = "conv" + std::to_string(conv++);
        s = "1/" + std::to_string(r.stride);
        pad = (r.kernel - 1) / 2;
        t *= r.stride;
        break;
      case StreamRow::Kind::kTcn:
        name = "tcn" + std::to_string(tcn++);
        pad = r.kernel - 1;  // causal, per dilation inside the block
        break;
    }
    char line[96];
    std::snprintf(line, sizeof(line), "%-10s %-10lld %-4lld %-5s %-4lld %lldT\n",
                  name.c_str(), static_cast<long long>(r.filters),
                  static_cast<long long>(r.kernel), s.c_str(),
                  static_cast<long long>(pad), static_cast<long long>(t));
    os << line;
  }
  return os.str();
}

int64_t StreamSpec::upsample_factor() const {
  int64_t f = 1;
  for (const StreamRow& r : rows)
    if (r.kind == StreamRow::Kind::kUp) f *= r.stride;
  return f;
}

int64_t StreamSpec::out_channels(int64_t in_ch) const {
  int64_t c = in_ch;
  for (const StreamRow& r : rows) c = r.filters;
  return c;
}

void StreamSpec::validate_video() const {
  int ups = 0;
  for (const StreamRow& r : rows)
    if (r.kind == StreamRow::Kind::kUp) {
      if (r.stride != 2)
        throw ConfigError("video stream: upsampling stages must be x2");
      ++ups;
    }
  if (ups != 2)
    throw ConfigError("video stream: need exactly two x2 upsampling stages, got " +
                      std::to_string(ups));
}

void StreamSpec::validate_audio() const {
  for (const StreamRow& r : rows) {
    if (r.kind == StreamRow::Kind::kUp)
      throw ConfigError("audio stream: upsampling rows not allowed");
    if (r.stride != 1)
      throw ConfigError("audio stream: all strides must be 1");
  }
}

// ---------------------------------------------------------------------------
// TemporalStream

TemporalStream::TemporalStream(int64_t in_ch, const StreamSpec& spec) : spec_(spec) {
  int64_t c = in_ch;
  int idx = 0;
  for (const StreamRow& r : spec.rows) {
    Stage stage;
    stage.row = r;
    const std::string name = "stage" + std::to_string(idx++);
    switch (r.kind) {
      case StreamRow::Kind::kFc: {
        stage.conv = std::make_unique<nn::Conv1dLayer>(c, r.filters, 1, nn::ConvSpec{});
        register_module(name, *stage.conv);
        break;
      }
      case StreamRow::Kind::kBlock: {
        if (r.filters != c)
          throw ConfigError("stream block row must preserve width (" +
                            std::to_string(c) + " -> " + std::to_string(r.filters) + ")");
        stage.block = std::make_unique<ResNet1DBlock>(c, r.filters, r.kernel, 1);
        register_module(name, *stage.block);
        break;
      }
      case StreamRow::Kind::kUp: {
        nn::ConvSpec cs;
        cs.transposed = true;
        cs.stride = r.stride;
        cs.pad_lo = (r.kernel - 1) / 2;
        stage.conv = std::make_unique<nn::Conv1dLayer>(c, r.filters, r.kernel, cs);
        register_module(name, *stage.conv);
        if (spec.unit == StreamSpec::Unit::kResnet1d) {
          stage.bn = std::make_unique<nn::BatchNorm>(r.filters);
          register_module(name + "/bn", *stage.bn);
        }
        break;
      }
      case StreamRow::Kind::kTcn: {
        if (r.filters != c)
          throw ConfigError("tcn row must preserve width (" + std::to_string(c) +
                            " -> " + std::to_string(r.filters) + ")");
        int64_t dilation = 1;
        for (int64_t b = 0; b < r.n_blocks; ++b) {
          stage.tcn.push_back(
              std::make_unique<TCNBlock>(c, r.kernel, dilation, spec.dropout_p));
          register_module(name + "/block" + std::to_string(b), *stage.tcn.back());
          dilation *= 2;
        }
        break;
      }
    }
    c = r.filters;
    stages_.push_back(std::move(stage));
  }
}

Tensor TemporalStream::forward(const Tensor& x) {
  Tensor h = x;
  for (Stage& stage : stages_) {
    switch (stage.row.kind) {
      case StreamRow::Kind::kFc:
        h = stage.conv->forward(h);
        break;
      case StreamRow::Kind::kBlock:
        h = stage.block->forward(h);
        break;
      case StreamRow::Kind::kUp:
        h = stage.conv->forward(h);
        if (stage.bn) h = stage.bn->forward(h);
        h = ops::relu(h);
        break;
      case StreamRow::Kind::kTcn:
        for (auto& block : stage.tcn) h = block->forward(h);
        break;
    }
  }
  return h;
}

Tensor video_stream(TemporalStream& stream, const Tensor& feats) {
  stream.spec().validate_video();
  if (feats.ndim() != 2) throw ShapeError("video stream: [T,D] features required");
  const int64_t t = feats.dim(0);
  Tensor out = stream.forward(ops::transpose2d(feats));
  if (out.dim(1) != 4 * t)
    throw ConfigError("video stream produced length " + std::to_string(out.dim(1)) +
                      ", expected 4T=" + std::to_string(4 * t));
  return ops::transpose2d(out);
}

Tensor audio_stream(TemporalStream& stream, const Tensor& mel) {
  stream.spec().validate_audio();
  if (mel.ndim() != 2) throw ShapeError("audio stream: [4T,F] magnitudes required");
  const int64_t l = mel.dim(0);
  Tensor out = stream.forward(ops::transpose2d(mel));
  if (out.dim(1) != l)
    throw ConfigError("audio stream changed temporal extent " + std::to_string(l) +
                      " -> " + std::to_string(out.dim(1)));
  return ops::transpose2d(out);
}

}  // namespace avsr
