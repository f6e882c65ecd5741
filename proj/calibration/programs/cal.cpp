#include <chrono>
#include <cstdio>
#include <cstdlib>
#include "srcl/eval.hpp"
#include "srcl/trainer.hpp"
using namespace srcl;
int main(int argc, char** argv) {
  auto env = [](const char* k, double d) { const char* v = getenv(k); return v ? atof(v) : d; };
  WorldSpec ws;
  ws.n_concepts = (size_t)env("NC", 4096); ws.dim_a = ws.dim_b = (size_t)env("DIM", 32);
  ws.latent_dim = (size_t)env("LAT", 16); ws.instance_dim=(size_t)env("INST",0); ws.instance_scale=env("INSTS",0); ws.emb_noise = env("SIG", 0.1);
  ws.false_neg_rate = env("RHO", 0.3); ws.partial_overlap = env("KAP", 0.5);
  TrainConfig tc; tc.steps = (size_t)env("STEPS", 2000); tc.batch = 64; tc.learning_rate = env("LR", 0.5);
  tc.momentum = env("MOM", 0.9); tc.temperature = env("TAU", 0.1); tc.emb_dim = (size_t)env("EMB", 16); tc.init_scale = env("INIT", 1.0);
  tc.regulator.use_temperature_in_weights = env("USET", 0) != 0; tc.regulator.similarity_scale=env("BETA",1);
  int seeds = (int)env("SEEDS", 10); size_t tsteps = (size_t)env("TSTEPS", tc.steps);
  int wins = 0; double sum = 0;
  for (int s = 1; s <= seeds; ++s) {
    auto t0 = std::chrono::steady_clock::now();
    ws.seed = s; tc.seed = s;
    TrainConfig tcfg = tc; tcfg.steps = tsteps;
    auto teacher = train_teacher(ws.clean(), tcfg).teacher;
    double tr1 = validation_retrieval(teacher.model(), ws, 512).mean_r1();
    tc.loss = LossKind::srcl;
    auto a = train_student(ws, teacher, tc);
    tc.loss = LossKind::infonce;
    auto b = train_student(ws, teacher, tc);
    double ra = validation_retrieval(a.student, ws, 512).mean_r1();
    double rb = validation_retrieval(b.student, ws, 512).mean_r1();
    auto h = weight_histogram(a, ws, 50);
    double frac0 = -1;
    if (env("H0", 0)) { tc.loss = LossKind::srcl; auto c = train_student(ws.clean(), teacher, tc); frac0 = weight_histogram(c, ws.clean(), 50).fraction_within(0.8, 1.2); }
    double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    printf("seed %d teacher %.4f srcl %.4f infonce %.4f diff %+.4f  fn %.3f tn %.3f frac %.3f frac0 %.3f (%.1fs)\n", s, tr1, ra, rb, ra - rb,
           h.mean_false_neg, h.mean_true_neg, h.fraction_within(0.8, 1.2), frac0, dt);
    wins += ra > rb; sum += ra - rb;
  }
  printf("wins %d/%d mean %+.4f\n", wins, seeds, sum / seeds);
}
