#ifndef SPPDM_NETSIM_HPP
#define SPPDM_NETSIM_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <cstdint>
#include <functional>
#include <future>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "sppdm/errors.hpp"
#include "sppdm/graph.hpp"
#include "sppdm/oracles.hpp"
#include "sppdm/solver.hpp"

namespace sppdm {

// --------------------------------------------------------------------------
// Communication accounting

struct RoundStats {
  int round = 0;
  long messages = 0;
  long scalars = 0;
};

struct RoundLog {
  std::vector<RoundStats> rounds;
  std::vector<long> sent_per_agent;
  std::vector<long> received_per_agent;
};

struct CommunicationSummary {
  int rounds = 0;
  long total_messages = 0;
  long total_scalars = 0;
};

inline CommunicationSummary communication_census(const RoundLog& log) {
  CommunicationSummary s;
  s.rounds = static_cast<int>(log.rounds.size());
  for (const auto& r : log.rounds) {
    s.total_messages += r.messages;
    s.total_scalars += r.scalars;
  }
  return s;
}

// --------------------------------------------------------------------------
// Fault injection (test hook): tamper with one directed send in one round.

struct FaultPlan {
  enum class Kind { none, drop, duplicate };
  Kind kind = Kind::none;
  int round = -1;
  int sender = -1;
  int receiver = -1;
};

// Delivery guard: every neighbor payload must arrive exactly once before a
// round's compute phase starts.  Only the strict mode exists; the enum is
// the knob config surfaces.
enum class GuardMode { strict };

namespace netdetail {

// Round-scoped delivery board.  One slot per directed edge; the guard
// demands every slot be filled exactly once before the round's compute
// phase starts.
class Mailboxes {
 public:
  Mailboxes(const Graph& g) : graph_(g) {
    slots_.resize(static_cast<std::size_t>(g.nodes));
    for (int i = 0; i < g.nodes; ++i)
      slots_[static_cast<std::size_t>(i)].resize(
          g.neighbors[static_cast<std::size_t>(i)].size());
  }

  void begin_round(int round) {
    round_ = round;
    for (auto& per_receiver : slots_)
      for (auto& slot : per_receiver) slot.reset();
  }

  void send(int sender, int receiver, const Vec& payload) {
    const int slot = slot_of(receiver, sender);
    if (slot < 0)
      throw LocalityViolation("agent " + std::to_string(sender) +
                              " attempted to message non-neighbor " +
                              std::to_string(receiver));
    auto& box = slots_[static_cast<std::size_t>(receiver)]
                      [static_cast<std::size_t>(slot)];
    if (box.has_value())
      throw DuplicatePayload("duplicate payload " + std::to_string(sender) +
                             " -> " + std::to_string(receiver) + " in round " +
                             std::to_string(round_));
    box = payload;
  }

  // exactly-once check for every inbound edge of every agent
  void check_complete() const {
    for (int i = 0; i < graph_.nodes; ++i) {
      const auto& nbrs = graph_.neighbors[static_cast<std::size_t>(i)];
      for (std::size_t jdx = 0; jdx < nbrs.size(); ++jdx) {
        if (!slots_[static_cast<std::size_t>(i)][jdx].has_value())
          throw MissingPayload("missing payload " +
                               std::to_string(nbrs[jdx]) + " -> " +
                               std::to_string(i) + " in round " +
                               std::to_string(round_));
      }
    }
  }

  const Vec& read(int receiver, int sender) const {
    const int slot = slot_of(receiver, sender);
    if (slot < 0)
      throw LocalityViolation("agent " + std::to_string(receiver) +
                              " attempted to read non-neighbor " +
                              std::to_string(sender));
    const auto& box = slots_[static_cast<std::size_t>(receiver)]
                            [static_cast<std::size_t>(slot)];
    if (!box.has_value())
      throw MissingPayload("read of undelivered payload " +
                           std::to_string(sender) + " -> " +
                           std::to_string(receiver));
    return *box;
  }

 private:
  int slot_of(int receiver, int sender) const {
    const auto& nbrs = graph_.neighbors[static_cast<std::size_t>(receiver)];
    const auto it = std::lower_bound(nbrs.begin(), nbrs.end(), sender);
    if (it == nbrs.end() || *it != sender) return -1;
    return static_cast<int>(it - nbrs.begin());
  }

  const Graph& graph_;
  std::vector<std::vector<std::optional<Vec>>> slots_;
  int round_ = 0;
};

}  // namespace netdetail

// --------------------------------------------------------------------------
// Distributed execution

struct NetsimOptions {
  FaultPlan fault;
  GuardMode guard = GuardMode::strict;
  bool parallel_agents = false;
  // update-order permutation hook (identity when empty); results must not
  // depend on it
  std::vector<int> agent_order;
};

struct NetsimResult {
  SolverState state;  // assembled matrix-form view of the final agent states
  RoundLog log;
};

// Runs the solver where every agent touches only its own state and the
// payloads its neighbors posted, one synchronous round at a time.  Round 0
// is the bootstrap exchange; rounds 1..K-1 are the main loop, matching the
// matrix-form solver bit for bit.  The visitor sees the assembled global
// state exactly like run_solver's.
inline NetsimResult run_distributed(const ProblemInstance& problem,
                                    const Graph& g, const SolverConfig& cfg,
                                    const Mat& x0,
                                    const StepVisitor& visit = {},
                                    const NetsimOptions& opts = {}) {
  cfg.validate();
  const int n = problem.dim;
  const int agents = g.nodes;
  if (x0.rows() != agents || x0.cols() != n)
    throw DimensionMismatch("x0 must be agents x dim");

  struct Agent {
    Vec x, x_prev, x_half, s_prev, z, z_prev, grad_prev, dual;
    std::vector<Vec> neighbor_prev;  // cached x_j^{k-1}, ascending j
  };
  std::vector<Agent> local(static_cast<std::size_t>(agents));
  for (int i = 0; i < agents; ++i)
    local[static_cast<std::size_t>(i)].x = x0.row(i).transpose();

  netdetail::Mailboxes mail(g);
  RoundLog log;
  log.sent_per_agent.assign(static_cast<std::size_t>(agents), 0);
  log.received_per_agent.assign(static_cast<std::size_t>(agents), 0);

  std::vector<int> order = opts.agent_order;
  if (order.empty()) {
    order.resize(static_cast<std::size_t>(agents));
    for (int i = 0; i < agents; ++i) order[static_cast<std::size_t>(i)] = i;
  }

  const auto exchange = [&](int round) {
    mail.begin_round(round);
    RoundStats stats;
    stats.round = round;
    for (int i = 0; i < agents; ++i) {
      for (int j : g.neighbors[static_cast<std::size_t>(i)]) {
        const bool faulted = opts.fault.round == round &&
                             opts.fault.sender == i &&
                             opts.fault.receiver == j;
        if (faulted && opts.fault.kind == FaultPlan::Kind::drop) continue;
        mail.send(i, j, local[static_cast<std::size_t>(i)].x);
        if (faulted && opts.fault.kind == FaultPlan::Kind::duplicate)
          mail.send(i, j, local[static_cast<std::size_t>(i)].x);
        ++stats.messages;
        stats.scalars += n;
        ++log.sent_per_agent[static_cast<std::size_t>(i)];
        ++log.received_per_agent[static_cast<std::size_t>(j)];
      }
    }
    mail.check_complete();  // drop guard: exactly-once before compute
    log.rounds.push_back(stats);
  };

  const auto for_each_agent = [&](const std::function<void(int)>& body) {
    if (!opts.parallel_agents || agents < 2) {
      for (int i : order) body(i);
      return;
    }
    std::vector<std::future<void>> tasks;
    tasks.reserve(order.size());
    for (int i : order)
      tasks.push_back(std::async(std::launch::async, body, i));
    for (auto& t : tasks) t.get();
  };

  const auto assemble = [&](int next_round) {
    SolverState st;
    st.x.resize(agents, n);
    st.x_prev.resize(agents, n);
    st.x_half.resize(agents, n);
    st.s_prev.resize(agents, n);
    st.z.resize(agents, n);
    st.z_prev.resize(agents, n);
    st.grad_prev.resize(agents, n);
    st.dual_image.resize(agents, n);
    for (int i = 0; i < agents; ++i) {
      const auto& a = local[static_cast<std::size_t>(i)];
      st.x.row(i) = a.x.transpose();
      st.x_prev.row(i) = a.x_prev.transpose();
      st.x_half.row(i) = a.x_half.transpose();
      st.s_prev.row(i) = a.s_prev.transpose();
      st.z.row(i) = a.z.transpose();
      st.z_prev.row(i) = a.z_prev.transpose();
      st.grad_prev.row(i) = a.grad_prev.transpose();
      st.dual_image.row(i) = a.dual.transpose();
    }
    st.round = next_round;
    return st;
  };

  // ---- round 0: bootstrap -------------------------------------------------
  exchange(0);
  for_each_agent([&](int i) {
    Agent& a = local[static_cast<std::size_t>(i)];
    const auto& nbrs = g.neighbors[static_cast<std::size_t>(i)];
    const int deg = g.degree[static_cast<std::size_t>(i)];
    const double psi = psi_weight(cfg, deg);

    a.neighbor_prev.clear();
    a.neighbor_prev.reserve(nbrs.size());
    std::vector<const Vec*> views;
    views.reserve(nbrs.size());
    for (int j : nbrs) {
      a.neighbor_prev.push_back(mail.read(i, j));
      views.push_back(&a.neighbor_prev.back());
    }

    const Vec grad0 = problem.smooth_term(i).gradient(a.x);
    a.dual = agent_kernel::dual_ascent_increment(cfg.alpha, deg, a.x, views);
    a.x_half = agent_kernel::bootstrap_half_point(cfg, psi, deg, a.x, views,
                                                  grad0, a.dual);
    const Vec x1 = problem.regularizer_term(i).prox(a.x_half, psi);
    a.x_prev = a.x;
    a.s_prev = a.x;
    a.z_prev = a.x;
    a.z = a.x + cfg.beta * (x1 - a.x);
    a.grad_prev = grad0;
    a.x = x1;
  });
  if (visit) visit(0, assemble(1));

  // ---- rounds 1..K-1 ------------------------------------------------------
  for (int k = 1; k < cfg.iterations; ++k) {
    exchange(k);
    const double eta = cfg.eta_at(k);
    for_each_agent([&](int i) {
      Agent& a = local[static_cast<std::size_t>(i)];
      const auto& nbrs = g.neighbors[static_cast<std::size_t>(i)];
      const int deg = g.degree[static_cast<std::size_t>(i)];
      const double psi = psi_weight(cfg, deg);

      std::vector<Vec> inbound;
      inbound.reserve(nbrs.size());
      std::vector<const Vec*> views_now, views_prev;
      views_now.reserve(nbrs.size());
      views_prev.reserve(nbrs.size());
      for (std::size_t jdx = 0; jdx < nbrs.size(); ++jdx) {
        inbound.push_back(mail.read(i, nbrs[jdx]));
        views_prev.push_back(&a.neighbor_prev[jdx]);
      }
      for (auto& v : inbound) views_now.push_back(&v);

      const Vec s = agent_kernel::momentum_point(a.x, a.x_prev, eta);
      const Vec grad = stochastic_gradient(
          problem.smooth_term(i), s,
          StreamKey{cfg.seed, static_cast<std::uint64_t>(i),
                    static_cast<std::uint64_t>(k)},
          cfg.batch);
      const Vec half = agent_kernel::half_point_update(
          cfg, psi, deg, a.x_half, a.x, a.x_prev, views_now, views_prev, s,
          a.s_prev, a.z, a.z_prev, grad, a.grad_prev);
      const Vec x_next = problem.regularizer_term(i).prox(half, psi);
      if (!x_next.allFinite())
        throw NonFiniteIterate("non-finite iterate of agent " +
                               std::to_string(i) + " at round " +
                               std::to_string(k));

      a.dual += agent_kernel::dual_ascent_increment(cfg.alpha, deg, a.x,
                                                    views_now);
      a.x_prev = a.x;
      a.x = x_next;
      a.x_half = half;
      a.s_prev = s;
      a.z_prev = a.z;
      a.z += cfg.beta * (x_next - a.z);
      a.grad_prev = grad;
      a.neighbor_prev = std::move(inbound);
    });
    if (visit) visit(k, assemble(k + 1));
  }

  NetsimResult result;
  result.state = assemble(cfg.iterations);
  result.log = std::move(log);
  return result;
}

}  // namespace sppdm

#endif  // SPPDM_NETSIM_HPP
