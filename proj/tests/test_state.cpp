#include <gtest/gtest.h>

#include <random>
#include <set>

#include "bridge/adapter.hpp"
#include "bridge/state.hpp"

using namespace bridge;
using S = BridgeState;

namespace {

const std::set<std::pair<S, S>> kLegal = {
    {S::New, S::Submitted},     {S::New, S::Failed},
    {S::Submitted, S::Running}, {S::Submitted, S::Done},    {S::Submitted, S::Killed},
    {S::Submitted, S::Failed},  {S::Submitted, S::Unknown},
    {S::Running, S::Done},      {S::Running, S::Killed},    {S::Running, S::Failed},
    {S::Running, S::Unknown},
    {S::Unknown, S::Running},   {S::Unknown, S::Done},      {S::Unknown, S::Killed},
    {S::Unknown, S::Failed},
};

}  // namespace

TEST(State, NamesRoundTrip) {
  for (auto s : kAllStates) EXPECT_EQ(parse_state(to_string(s)), s);
  EXPECT_FALSE(parse_state("RUNNNING"));
  EXPECT_EQ(to_string(S::Submitted), "SUBMITTED");
}

TEST(State, TransitionExamples) {
  EXPECT_TRUE(validate_transition(S::Submitted, S::Running));
  EXPECT_FALSE(validate_transition(S::Done, S::Running));
  EXPECT_TRUE(validate_transition(S::Unknown, S::Done));
}

TEST(State, TransitionTableIsExact) {
  for (auto a : kAllStates) {
    for (auto b : kAllStates) {
      EXPECT_EQ(validate_transition(a, b), kLegal.count({a, b}) == 1)
          << to_string(a) << " -> " << to_string(b);
    }
  }
}

TEST(State, TerminalStatesHaveNoExit) {
  for (auto a : kAllStates) {
    if (!is_terminal(a)) continue;
    for (auto b : kAllStates) EXPECT_FALSE(validate_transition(a, b));
  }
}

TEST(State, RandomSequencesNeverLeaveTerminal) {
  std::mt19937 rng(20240611);
  std::uniform_int_distribution<std::size_t> pick(0, kAllStates.size() - 1);
  int reached_terminal = 0;
  for (int run = 0; run < 10000; ++run) {
    S current = S::New;
    for (int step = 0; step < 24; ++step) {
      S next = kAllStates[pick(rng)];
      bool ok = validate_transition(current, next);
      if (is_terminal(current)) ASSERT_FALSE(ok);
      if (ok) current = next;
    }
    reached_terminal += is_terminal(current);
  }
  EXPECT_GT(reached_terminal, 0);
}

TEST(State, ParseKey) {
  EXPECT_EQ(parse_key("ns/job", "default"), (JobKey{"ns", "job"}));
  EXPECT_EQ(parse_key("job", "default"), (JobKey{"default", "job"}));
  EXPECT_EQ((JobKey{"a", "b"}).str(), "a/b");
}

TEST(MapRemoteState, SlurmExamples) {
  EXPECT_EQ(map_remote_state(AdapterKind::Slurm, "COMPLETED"), S::Done);
  EXPECT_EQ(map_remote_state(AdapterKind::Slurm, "CANCELLED"), S::Killed);
  EXPECT_EQ(map_remote_state(AdapterKind::Slurm, "GIBBERISH"), S::Unknown);
  EXPECT_EQ(map_remote_state(AdapterKind::Slurm, "PENDING"), S::Submitted);
  EXPECT_EQ(map_remote_state(AdapterKind::Slurm, "RUNNING"), S::Running);
  EXPECT_EQ(map_remote_state(AdapterKind::Slurm, "FAILED"), S::Failed);
}

TEST(MapRemoteState, LsfExamples) {
  EXPECT_EQ(map_remote_state(AdapterKind::Lsf, "PEND"), S::Submitted);
  EXPECT_EQ(map_remote_state(AdapterKind::Lsf, "RUN"), S::Running);
  EXPECT_EQ(map_remote_state(AdapterKind::Lsf, "DONE"), S::Done);
  EXPECT_EQ(map_remote_state(AdapterKind::Lsf, "EXIT"), S::Failed);
  EXPECT_EQ(map_remote_state(AdapterKind::Lsf, "nonsense"), S::Unknown);
}

TEST(MapRemoteState, TotalOverRandomStrings) {
  std::mt19937 rng(7);
  std::uniform_int_distribution<int> len(0, 40);
  std::uniform_int_distribution<int> byte(0, 255);
  for (int i = 0; i < 20000; ++i) {
    std::string s(static_cast<std::size_t>(len(rng)), '\0');
    for (auto& c : s) c = static_cast<char>(byte(rng));
    for (auto kind : {AdapterKind::Slurm, AdapterKind::Lsf}) {
      auto mapped = map_remote_state(kind, s);
      EXPECT_NE(mapped, S::New);
      EXPECT_TRUE(parse_state(to_string(mapped)).has_value());
    }
  }
}
