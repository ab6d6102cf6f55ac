#include "scissor/autodiff.h"

#include <algorithm>
#include <cmath>
#include <string>

namespace scissor::ad {
namespace {

struct PoolState {
  std::vector<std::unique_ptr<Tape>> tapes;
  size_t depth = 0;
};

thread_local PoolState g_pool;

}  // namespace

std::vector<double> Tape::Adjoints(int32_t output) const {
  std::vector<double> adj(nodes_.size(), 0.0);
  if (output < 0) return adj;
  adj[output] = 1.0;
  for (int32_t i = output; i >= 0; --i) {
    const double w = adj[i];
    if (w == 0.0) continue;
    const Node& n = nodes_[i];
    if (n.a != kNone) adj[n.a] += w * n.da;
    if (n.b != kNone) adj[n.b] += w * n.db;
  }
  return adj;
}

ScopedTape::ScopedTape(Tape& tape) : previous_(Tape::active_) {
  Tape::active_ = &tape;
}

ScopedTape::~ScopedTape() { Tape::active_ = previous_; }

Var Var::Independent(double value) {
  Tape* tape = Tape::active();
  if (tape == nullptr) {
    throw std::logic_error("Var::Independent: no active tape");
  }
  return Recorded(value, tape->NewLeaf());
}

namespace internal {

void ThrowNan(const char* op, bool in_derivative) {
  std::string msg = in_derivative ? "non-finite derivative in '"
                                  : "NaN produced by '";
  msg += op;
  msg += "'";
  throw NanError(msg);
}

Tape& TapePool::Acquire() {
  PoolState& p = g_pool;
  if (p.depth == p.tapes.size()) p.tapes.push_back(std::make_unique<Tape>());
  return *p.tapes[p.depth++];
}

void TapePool::Release() { --g_pool.depth; }

}  // namespace internal

void ParamVector::Add(const std::string& name, double value) {
  if (Find(name) >= 0) {
    throw std::invalid_argument("ParamVector: duplicate name '" + name + "'");
  }
  names_.push_back(name);
  values_.push_back(value);
}

int ParamVector::Find(const std::string& name) const {
  auto it = std::find(names_.begin(), names_.end(), name);
  return it == names_.end() ? -1 : static_cast<int>(it - names_.begin());
}

double ParamVector::Get(const std::string& name) const {
  const int i = Find(name);
  if (i < 0) throw std::out_of_range("ParamVector: no entry '" + name + "'");
  return values_[i];
}

double relative_error(double a, double b, double scale) {
  const double denom =
      std::max({std::abs(a), std::abs(b), 1e-3 * scale, 1e-12});
  return std::abs(a - b) / denom;
}

}  // namespace scissor::ad
