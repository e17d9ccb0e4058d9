#include "pvfl/harness/experiment.hpp"

#include <chrono>
#include <fstream>
#include <stdexcept>

#include "pvfl/fl/metrics.hpp"
#include "pvfl/fl/partition.hpp"
#include "pvfl/seeds.hpp"

namespace pvfl::harness {

using agent::PolicyKind;

Federation build_federation(const ExperimentConfig& c, std::uint64_t seed) {
  fl::LabeledDataset train, test;
  if (c.dataset.kind == "blobs") {
    auto split = fl::make_blobs(c.dataset.blobs, seeds::derive(seed, "dataset"));
    train = std::move(split.train);
    test = std::move(split.test);
  } else {
    auto full = fl::load_csv(c.dataset.path, c.dataset.label_column, c.dataset.num_classes);
    if (!c.dataset.test_path.empty()) {
      train = std::move(full);
      test = fl::load_csv(c.dataset.test_path, c.dataset.label_column, train.num_classes());
    } else {
      const auto split = fl::stratified_holdout(full, c.dataset.test_fraction, seeds::derive(seed, "dataset"));
      test = full.subset(split.holdout);
      train = full.subset(split.rest);
    }
  }
  if (train.size() < c.num_clients) throw std::invalid_argument("fewer training samples than clients");

  const auto held = fl::stratified_holdout(train, c.validation_fraction, seeds::derive(seed, "validation"));
  Federation fed;
  fed.validation = train.subset(held.holdout);
  const fl::LabeledDataset pool = train.subset(held.rest);

  const std::uint64_t pseed = seeds::derive(seed, "partition");
  fl::IndexSets parts;
  if (c.partition.kind == "iid") {
    parts = fl::partition_iid(pool.size(), c.num_clients, pseed);
  } else if (c.partition.kind == "dirichlet") {
    parts = fl::partition_dirichlet(pool.labels(), c.num_clients, c.partition.alpha, pseed);
  } else {
    parts = fl::partition_label_skew(pool.labels(), c.num_clients, c.partition.classes_per_client, pseed);
  }
  for (std::size_t i = 0; i < parts.size(); ++i) {
    fed.shards.push_back({static_cast<int>(i), pool.subset(parts[i])});
  }

  const std::uint64_t vseed = seeds::derive(seed, "visibility");
  fed.visibility = std::make_shared<const VisibilityProcess>(
      c.visibility.kind == "ms" ? VisibilityProcess::mobile_server(c.num_clients, c.visibility.cluster_size, vseed)
                                : VisibilityProcess::random_availability(c.num_clients, c.visibility.p, vseed));

  fl::ClassifierSpec spec;
  spec.widths.push_back(train.feature_dim());
  for (std::size_t h : c.hidden) spec.widths.push_back(h);
  spec.widths.push_back(train.num_classes());
  fed.model = fl::Classifier(spec);
  fed.initial = fed.model.init(seeds::derive(seed, "model_init"));
  fed.test = std::move(test);
  return fed;
}

FederatedEnv make_env(const ExperimentConfig& c, const Federation& fed, PolicyKind policy, std::uint64_t seed) {
  EnvConfig ec;
  ec.selection_size = c.K;
  ec.lambda = c.lambda;
  ec.local = c.local;
  ec.local.prox_mu = policy == PolicyKind::FedProxRandom ? c.fedprox_mu : 0.0;
  ec.seed = seed;
  switch (policy) {
    case PolicyKind::STDQN: ec.aggregation_window = c.H; break;
    case PolicyKind::TemporalAvgRandom: ec.aggregation_window = c.temporal_window; break;
    default: ec.aggregation_window = 1;
  }
  std::shared_ptr<const qnet::ProjectionMatrix> projection;
  if (policy == PolicyKind::STDQN) {
    projection = std::make_shared<const qnet::ProjectionMatrix>(c.d_feat, fed.model.num_params(),
                                                                seeds::derive(seed, "projection"));
  }
  return FederatedEnv(fed.model, fed.shards, fed.validation, *fed.visibility, ec, fed.initial, projection);
}

MetricsLog run_policy(const ExperimentConfig& c, const Federation& fed, PolicyKind policy, std::uint64_t seed,
                      std::ostream* sink, const std::filesystem::path& checkpoint_dir) {
  using clock = std::chrono::steady_clock;
  FederatedEnv env = make_env(c, fed, policy, seed);

  std::unique_ptr<agent::DqnAgent> dqn;
  if (policy == PolicyKind::STDQN) {
    qnet::QNetConfig nc;
    nc.d_feat = c.d_feat;
    nc.d_token = c.d_token;
    nc.d_emb = c.d_emb;
    nc.heads = c.heads;
    nc.num_clients = c.num_clients;
    nc.max_history = c.H + 1;
    dqn = std::make_unique<agent::DqnAgent>(c.agent, nc, seed);
  }
  Rng select_rng(seeds::derive(seed, "agent"));

  MetricsLog log;
  log.policy = agent::policy_label(policy);
  log.seed = seed;
  auto test_accuracy = [&] {
    const auto pred = env.model().predict(env.global(), fed.test);
    return fl::accuracy(pred, fed.test.labels());
  };
  auto emit = [&](MetricsRow row) {
    if (sink) {
      *sink << format_row(row) << '\n';
      sink->flush();
    }
    log.rows.push_back(std::move(row));
  };
  if (sink) *sink << kMetricsHeader << '\n';

  Observation obs = env.reset();
  MetricsRow first;
  first.policy = log.policy;
  first.seed = seed;
  first.reward = env.reward_memory();
  first.val_f1 = env.validation_f1();
  first.test_acc = test_accuracy();
  emit(first);

  for (std::uint64_t t = 0; t < c.rounds; ++t) {
    const auto start = clock::now();
    std::vector<int> action;
    if (dqn) {
      action = dqn->act(obs, agent::epsilon_at(c.agent, t, c.rounds));
    } else if (!obs.empty()) {
      action = agent::baseline_select(policy, obs, env.global(), c.K, select_rng);
    }
    const std::size_t cluster_size = obs.ids.size();
    StepOutcome out = env.step(action);
    out.record.terminal = t + 1 == c.rounds;

    MetricsRow row;
    if (dqn) row.td_loss = dqn->learn(std::move(out.record));
    row.round = t + 1;
    row.policy = log.policy;
    row.seed = seed;
    row.cluster_size = cluster_size;
    row.selected = action;
    row.reward = out.reward;
    row.val_f1 = out.validation_f1;
    row.test_acc = test_accuracy();
    if (c.log_wall_time) row.wall_ms = std::chrono::duration<double, std::milli>(clock::now() - start).count();
    emit(std::move(row));
    obs = std::move(out.next);
  }

  if (dqn && !checkpoint_dir.empty()) {
    std::filesystem::create_directories(checkpoint_dir);
    const std::string stem = "qnet_" + agent::policy_key(policy) + "_seed" + std::to_string(seed);
    dqn->online().save(checkpoint_dir / (stem + "_online.pvqn"));
    dqn->target().save(checkpoint_dir / (stem + "_target.pvqn"));
  }
  return log;
}

std::filesystem::path metrics_path(const std::filesystem::path& dir, PolicyKind policy, std::uint64_t seed) {
  return dir / ("metrics_" + agent::policy_key(policy) + "_seed" + std::to_string(seed) + ".csv");
}

ExperimentResult run_experiment(const ExperimentConfig& c) {
  validate(c);
  std::filesystem::create_directories(c.out_dir);
  ExperimentResult result;
  for (std::uint64_t seed : c.seeds) {
    const Federation fed = build_federation(c, seed);
    for (PolicyKind policy : c.policies) {
      const auto path = metrics_path(c.out_dir, policy, seed);
      std::ofstream out(path);
      if (!out) throw std::runtime_error("cannot write " + path.string());
      result.logs.push_back(run_policy(c, fed, policy, seed, &out, c.save_checkpoints ? c.out_dir : std::filesystem::path{}));
      result.files.push_back(path);
    }
  }
  result.summary = summarize(result.logs);
  write_summary(c.out_dir, result.summary);
  return result;
}

}  // namespace pvfl::harness
