#include "calscan/model_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "json.hpp"

#include "calscan/errors.hpp"

namespace calscan {

namespace {

using nlohmann::json;

constexpr std::size_t kMagicLen = sizeof(kModelMagic) - 1;

void put_u64(std::ostream& out, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(b, 8);
}

void put_f64(std::ostream& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

std::uint64_t get_u64(std::istream& in) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) throw FormatError("model file is truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

double get_f64(std::istream& in) { return std::bit_cast<double>(get_u64(in)); }

json range_json(const std::optional<Range>& r) { return r ? json::array({r->lo, r->hi}) : json(nullptr); }

json stage_json(const StageParams& s) {
  return {{"stage", s.stage},
          {"dtheta", range_json(s.dtheta)},
          {"side", json::array({s.side.lo, s.side.hi})},
          {"region", s.region ? json(*s.region) : json(nullptr)},
          {"count", s.count},
          {"threshold", s.threshold ? json(*s.threshold) : json(nullptr)}};
}

std::optional<Range> range_from(const json& j) {
  if (j.is_null()) return std::nullopt;
  return Range{j.at(0).get<double>(), j.at(1).get<double>()};
}

std::optional<double> number_from(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

StageParams stage_from(const json& j) {
  StageParams s;
  s.stage = j.at("stage").get<int>();
  s.dtheta = range_from(j.at("dtheta"));
  s.side = *range_from(j.at("side"));
  s.region = number_from(j.at("region"));
  s.count = j.at("count").get<int>();
  s.threshold = number_from(j.at("threshold"));
  return s;
}

void write_block(std::ostream& out, const SvrModel& m) {
  put_u64(out, m.support_vectors.size());
  put_u64(out, kDescriptorSize);
  for (const Descriptor& row : m.support_vectors)
    for (float v : row) put_f64(out, v);
  for (double c : m.dual_coefs) put_f64(out, c);
  put_f64(out, m.bias);
  put_f64(out, m.hyper.C);
  put_f64(out, m.hyper.epsilon);
  put_f64(out, m.hyper.gamma);
  put_f64(out, m.hyper.tol);
  put_f64(out, m.hyper.max_passes);
}

SvrModel read_block(std::istream& in) {
  SvrModel m;
  const std::uint64_t n = get_u64(in);
  const std::uint64_t dim = get_u64(in);
  if (dim != kDescriptorSize) throw FormatError("model block has dimension " + std::to_string(dim));
  if (n > (std::uint64_t{1} << 32)) throw FormatError("model block support vector count is implausible");
  m.support_vectors.resize(n);
  for (Descriptor& row : m.support_vectors)
    for (float& v : row) v = static_cast<float>(get_f64(in));
  m.dual_coefs.resize(n);
  for (double& c : m.dual_coefs) c = get_f64(in);
  m.bias = get_f64(in);
  m.hyper.C = get_f64(in);
  m.hyper.epsilon = get_f64(in);
  m.hyper.gamma = get_f64(in);
  m.hyper.tol = get_f64(in);
  m.hyper.max_passes = static_cast<int>(get_f64(in));
  return m;
}

}  // namespace

void write_model(std::ostream& out, const RirvModel& model) {
  json header;
  header["format_version"] = RirvModel::kFormatVersion;
  header["working_side"] = model.working_side();
  json train = json::array(), predict = json::array();
  for (const StageParams& s : model.stages().train) train.push_back(stage_json(s));
  for (const StageParams& s : model.stages().predict) predict.push_back(stage_json(s));
  header["stages"] = {{"train", train}, {"predict", predict}};
  json solver = json::array();
  for (int h = 1; h <= kNumStages; ++h) {
    for (int i = 0; i < kNumLandmarks; ++i) {
      for (const SvrModel* m : {&model.regressors(h, i).x, &model.regressors(h, i).y})
        solver.push_back({{"converged", m->converged}, {"iterations", m->iterations}});
    }
  }
  header["solver"] = solver;
  const std::string text = header.dump();

  out.write(kModelMagic, kMagicLen);
  put_u64(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (int h = 1; h <= kNumStages; ++h) {
    for (int i = 0; i < kNumLandmarks; ++i) {
      write_block(out, model.regressors(h, i).x);
      write_block(out, model.regressors(h, i).y);
    }
  }
  if (!out) throw IoError("failed writing model");
}

RirvModel read_model(std::istream& in) {
  char magic[kMagicLen];
  if (!in.read(magic, kMagicLen) || std::memcmp(magic, kModelMagic, kMagicLen) != 0)
    throw FormatError("not a calscan model (bad magic)");
  const std::uint64_t len = get_u64(in);
  if (len > (std::uint64_t{1} << 26)) throw FormatError("model header is implausibly large");
  std::string text(len, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(len))) throw FormatError("model header is truncated");

  json header;
  StageTable stages;
  int working_side = 0;
  try {
    header = json::parse(text);
    const int version = header.at("format_version").get<int>();
    if (version != RirvModel::kFormatVersion)
      throw FormatError("unsupported model format version " + std::to_string(version));
    working_side = header.at("working_side").get<int>();
    const json& st = header.at("stages");
    if (st.at("train").size() != kNumStages || st.at("predict").size() != kNumStages)
      throw FormatError("model header must list four stages");
    for (int h = 0; h < kNumStages; ++h) {
      stages.train[h] = stage_from(st.at("train").at(h));
      stages.predict[h] = stage_from(st.at("predict").at(h));
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed model header: ") + e.what());
  }

  std::array<std::array<RegressorPair, kNumLandmarks>, kNumStages> regs;
  const json* solver = header.contains("solver") ? &header["solver"] : nullptr;
  int k = 0;
  for (auto& stage : regs) {
    for (RegressorPair& p : stage) {
      for (SvrModel* m : {&p.x, &p.y}) {
        *m = read_block(in);
        if (solver && solver->size() > static_cast<std::size_t>(k)) {
          m->converged = (*solver)[k].value("converged", true);
          m->iterations = (*solver)[k].value("iterations", std::int64_t{0});
        }
        ++k;
      }
    }
  }
  try {
    return RirvModel(working_side, stages, std::move(regs));
  } catch (const ArgumentError& e) {
    throw FormatError(std::string("invalid model: ") + e.what());
  }
}

void save_model(const RirvModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  write_model(out, model);
}

RirvModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return read_model(in);
}

}  // namespace calscan
