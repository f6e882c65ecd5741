#include <cstdio>
#include <cstdlib>
#include "srcl/eval.hpp"
using namespace srcl;
int main() {
  auto env = [](const char* k, double d) { const char* v = getenv(k); return v ? atof(v) : d; };
  WorldSpec ws; ws.n_concepts=4096; ws.dim_a=ws.dim_b=(size_t)env("DIM",32); ws.latent_dim=(size_t)env("LAT",16);
  ws.instance_dim=(size_t)env("INST",8); ws.instance_scale=env("INSTS",0.5); ws.emb_noise=env("SIG",0.1);
  ws.false_neg_rate=0.3; ws.n_clusters=(size_t)env("NCL",0); ws.cluster_spread=env("CSP",1); ws.partial_overlap=0.5;
  TrainConfig tc; tc.steps=(size_t)env("STEPS",2000); tc.learning_rate=env("LR",0.05); tc.init_scale=1; tc.emb_dim=(size_t)env("EMB",16); tc.regulator.use_temperature_in_weights = env("USET",0)!=0; tc.temperature=env("TAU",0.1); tc.regulator.similarity_scale=env("BETA",1);
  int seeds=(int)env("SEEDS",3); int good=0;
  std::vector<double> th={0,0.1,0.2,0.3,0.4,0.5,0.6,0.7};
  for(int s=1;s<=seeds;++s){ ws.seed=s; tc.seed=s;
    auto teacher=train_teacher(ws.clean(), tc).teacher;
    TrainerState st{initial_student(ws,tc), teacher, {}, {}, 0, {}, tc, ws};
    SweepOptions o; o.steps=(size_t)env("SSTEPS",0);
    auto pts=threshold_mask_sweep(st, ws, th, o);
    double best=-1; size_t bi=0;
    printf("seed %d:", s);
    for(size_t i=0;i<pts.size();++i){ double r=pts[i].report.mean_r1(); printf(" %.4f", r); if(r>best){best=r;bi=i;} }
    printf("  argmax %zu skipped@0.7 %zu\n", bi, pts.back().skipped_rows);
    good += (bi>0 && bi+1<pts.size());
  }
  printf("interior %d/%d\n", good, seeds);
}
