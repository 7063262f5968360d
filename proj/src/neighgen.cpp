#include "latexplain/neighgen.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

namespace latexplain {

namespace {

constexpr double kDedupTolerance = 1e-9;

double squashed_distance(const LatentPoint& a, const LatentPoint& b) {
  const double d = (a - b).norm();
  return d / (1.0 + d);
}

bool same_point(const LatentPoint& a, const LatentPoint& b) {
  return (a - b).lpNorm<Eigen::Infinity>() < kDedupTolerance;
}

double fitness_value(const LatentPoint& h, const LatentPoint& z, bool label_matches) {
  const double indicator = label_matches ? 1.0 : 0.0;
  const double proximity = 1.0 - squashed_distance(h, z);
  const double self_penalty = same_point(h, z) ? 1.0 : 0.0;
  return indicator + proximity - self_penalty;
}

struct Candidate {
  LatentPoint latent;
  Label label = 0;
  double fitness = 0.0;
};

bool lex_less(const LatentPoint& a, const LatentPoint& b) {
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (a(i) < b(i)) return true;
    if (a(i) > b(i)) return false;
  }
  return false;
}

// Canonical order: best fitness first, lexicographic latent as tie-break, so
// concurrent fitness evaluation can never change the result.
void canonical_sort(std::vector<Candidate>& cands) {
  std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
    if (a.fitness != b.fitness) return a.fitness > b.fitness;
    return lex_less(a.latent, b.latent);
  });
}

class BatchEvaluator {
 public:
  BatchEvaluator(const BlackBox& bb, const AaeModel& aae) : bb_(bb), aae_(aae) {}

  // Decodes and labels a whole population at once.
  std::vector<Label> labels_of(const std::vector<LatentPoint>& pop) const {
    Matrix latents(static_cast<Eigen::Index>(pop.size()), aae_.k);
    for (std::size_t i = 0; i < pop.size(); ++i)
      latents.row(static_cast<Eigen::Index>(i)) = pop[i].transpose();
    return classify(bb_, decode_batch(aae_, latents));
  }

 private:
  const BlackBox& bb_;
  const AaeModel& aae_;
};

std::vector<LatentPoint> genetic_search(const LatentPoint& z, Label target, bool want_same,
                                        const BatchEvaluator& eval, const GenConfig& cfg,
                                        std::mt19937_64& rng,
                                        std::vector<Candidate>* out) {
  std::normal_distribution<double> gauss(0.0, cfg.mutation_sigma);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const Eigen::Index k = z.size();

  auto perturb = [&]() {
    LatentPoint h = z;
    for (Eigen::Index i = 0; i < k; ++i) h(i) += gauss(rng);
    return h;
  };

  std::vector<LatentPoint> pop;
  pop.reserve(cfg.population);
  for (int i = 0; i < cfg.population; ++i) pop.push_back(perturb());

  std::vector<double> fitness(pop.size());
  auto evaluate = [&](const std::vector<LatentPoint>& p, std::vector<double>& f) {
    const std::vector<Label> labels = eval.labels_of(p);
    f.resize(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
      const bool match = want_same ? labels[i] == target : labels[i] != target;
      f[i] = fitness_value(p[i], z, match);
    }
    return labels;
  };
  std::vector<Label> labels = evaluate(pop, fitness);

  constexpr int kElites = 2;
  for (int gen = 0; gen < cfg.generations; ++gen) {
    std::vector<LatentPoint> next;
    next.reserve(pop.size());

    std::vector<std::size_t> order(pop.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if (fitness[a] != fitness[b]) return fitness[a] > fitness[b];
      return lex_less(pop[a], pop[b]);
    });
    for (int e = 0; e < kElites && e < static_cast<int>(order.size()); ++e)
      next.push_back(pop[order[static_cast<std::size_t>(e)]]);

    std::uniform_int_distribution<std::size_t> pick(0, pop.size() - 1);
    auto tournament = [&]() -> const LatentPoint& {
      std::size_t best = pick(rng);
      for (int t = 1; t < 3; ++t) {
        const std::size_t other = pick(rng);
        if (fitness[other] > fitness[best]) best = other;
      }
      return pop[best];
    };

    while (next.size() < pop.size()) {
      const LatentPoint& p1 = tournament();
      const LatentPoint& p2 = tournament();
      LatentPoint child = p1;
      if (unit(rng) < cfg.crossover_prob)
        for (Eigen::Index i = 0; i < k; ++i)
          if (unit(rng) < 0.5) child(i) = p2(i);
      for (Eigen::Index i = 0; i < k; ++i)
        if (unit(rng) < cfg.mutation_prob) child(i) += gauss(rng);
      next.push_back(std::move(child));
    }
    pop = std::move(next);
    labels = evaluate(pop, fitness);
  }

  if (out) {
    for (std::size_t i = 0; i < pop.size(); ++i)
      out->push_back({pop[i], labels[i], fitness[i]});
  }
  return pop;
}

}  // namespace

double fitness_same(const LatentPoint& h, const LatentPoint& z, Label h_label, Label target) {
  return fitness_value(h, z, h_label == target);
}

double fitness_diff(const LatentPoint& h, const LatentPoint& z, Label h_label, Label target) {
  return fitness_value(h, z, h_label != target);
}

double fitness_same(const LatentPoint& h, const LatentPoint& z, const BlackBox& bb,
                    const AaeModel& aae) {
  const Label target = classify_one(bb, decode(aae, z));
  return fitness_same(h, z, classify_one(bb, decode(aae, h)), target);
}

double fitness_diff(const LatentPoint& h, const LatentPoint& z, const BlackBox& bb,
                    const AaeModel& aae) {
  const Label target = classify_one(bb, decode(aae, z));
  return fitness_diff(h, z, classify_one(bb, decode(aae, h)), target);
}

Neighborhood generate_neighborhood(const LatentPoint& z, const BlackBox& bb,
                                   const AaeModel& aae, const GenConfig& cfg,
                                   std::optional<Label> target_override) {
  if (cfg.n_total < 2) throw ConfigError("neighgen: n_total must be >= 2");
  if (z.size() != aae.k) throw ShapeError("neighgen: z dimension does not match latent dim");

  const Label target =
      target_override ? *target_override : classify_one(bb, decode(aae, z));
  const BatchEvaluator eval(bb, aae);
  std::mt19937_64 rng(cfg.seed);

  std::vector<Candidate> candidates;
  genetic_search(z, target, /*want_same=*/true, eval, cfg, rng, &candidates);
  genetic_search(z, target, /*want_same=*/false, eval, cfg, rng, &candidates);
  canonical_sort(candidates);

  // Gate, deduplicate, and split into the two label groups.
  auto gated_scores = [&](const std::vector<Candidate>& cands) {
    Matrix latents(static_cast<Eigen::Index>(cands.size()), aae.k);
    for (std::size_t i = 0; i < cands.size(); ++i)
      latents.row(static_cast<Eigen::Index>(i)) = cands[i].latent.transpose();
    return discriminate_batch(aae, latents);
  };
  const Vector scores = gated_scores(candidates);

  std::vector<Candidate> same_group, diff_group;
  auto try_add = [&](const Candidate& c) {
    auto& group = (c.label == target) ? same_group : diff_group;
    for (const Candidate& kept : same_group)
      if (same_point(kept.latent, c.latent)) return;
    for (const Candidate& kept : diff_group)
      if (same_point(kept.latent, c.latent)) return;
    group.push_back(c);
  };
  for (std::size_t i = 0; i < candidates.size(); ++i)
    if (scores(static_cast<Eigen::Index>(i)) >= cfg.validity_threshold)
      try_add(candidates[i]);

  const int want_same_count =
      std::clamp(static_cast<int>(std::llround(cfg.balance * cfg.n_total)), 0, cfg.n_total);
  const int want_diff_count = cfg.n_total - want_same_count;

  // Pad with extra gated samples around z, within a 10x oversampling budget.
  std::normal_distribution<double> gauss(0.0, cfg.mutation_sigma);
  long budget = 10L * cfg.n_total;
  const int pad_chunk = 64;
  while (budget > 0 && (static_cast<int>(same_group.size()) < want_same_count ||
                        static_cast<int>(diff_group.size()) < want_diff_count)) {
    const int chunk = static_cast<int>(std::min<long>(pad_chunk, budget));
    budget -= chunk;
    std::vector<Candidate> extras(static_cast<std::size_t>(chunk));
    Matrix latents(chunk, aae.k);
    for (int i = 0; i < chunk; ++i) {
      LatentPoint h = z;
      for (Eigen::Index d = 0; d < z.size(); ++d) h(d) += gauss(rng);
      extras[static_cast<std::size_t>(i)].latent = h;
      latents.row(i) = h.transpose();
    }
    const Vector pad_scores = discriminate_batch(aae, latents);
    const std::vector<Label> pad_labels = classify(bb, decode_batch(aae, latents));
    for (int i = 0; i < chunk; ++i) {
      if (pad_scores(i) < cfg.validity_threshold) continue;
      Candidate& c = extras[static_cast<std::size_t>(i)];
      c.label = pad_labels[static_cast<std::size_t>(i)];
      c.fitness = fitness_value(c.latent, z, c.label == target);
      try_add(c);
    }
  }

  if (same_group.empty() && diff_group.empty())
    throw GenerationError(
        "neighgen: no candidate passed validity gating at threshold " +
        std::to_string(cfg.validity_threshold));

  canonical_sort(same_group);
  canonical_sort(diff_group);

  // Fill the per-group quotas first, then backfill from the other group's
  // surplus so |H| reaches n_total whenever enough gated candidates exist.
  std::vector<Candidate> chosen;
  chosen.reserve(static_cast<std::size_t>(cfg.n_total));
  const std::size_t take_same =
      std::min<std::size_t>(same_group.size(), static_cast<std::size_t>(want_same_count));
  const std::size_t take_diff =
      std::min<std::size_t>(diff_group.size(), static_cast<std::size_t>(want_diff_count));
  chosen.insert(chosen.end(), same_group.begin(), same_group.begin() + static_cast<std::ptrdiff_t>(take_same));
  chosen.insert(chosen.end(), diff_group.begin(), diff_group.begin() + static_cast<std::ptrdiff_t>(take_diff));
  std::size_t spare_same = take_same, spare_diff = take_diff;
  while (chosen.size() < static_cast<std::size_t>(cfg.n_total)) {
    if (spare_same < same_group.size()) {
      chosen.push_back(same_group[spare_same++]);
    } else if (spare_diff < diff_group.size()) {
      chosen.push_back(diff_group[spare_diff++]);
    } else {
      break;
    }
  }

  Neighborhood neigh;
  neigh.target_label = target;
  neigh.degenerate = same_group.empty() || diff_group.empty();
  neigh.latents.resize(static_cast<Eigen::Index>(chosen.size()), aae.k);
  neigh.labels.resize(chosen.size());
  for (std::size_t i = 0; i < chosen.size(); ++i) {
    neigh.latents.row(static_cast<Eigen::Index>(i)) = chosen[i].latent.transpose();
    neigh.labels[i] = chosen[i].label;
  }
  neigh.decoded = decode_batch(aae, neigh.latents);
  return neigh;
}

}  // namespace latexplain
