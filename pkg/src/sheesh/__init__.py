"""k-means clustering for very large k via seeded search-graph ANNS."""

from .dataset import (Chunk, VectorSet, gen_gaussian_mixture, open_bvecs,
                      open_fvecs, stream_chunks, write_bvecs, write_fvecs)
from .graph import (BuildParams, SearchGraph, SearchParams, SearchTrace,
                    beam_search, bulk_build, hierarchical_search,
                    rebuild_from_previous)
from .kmeans import (CentersState, EngineOptions, IterationStats,
                     MultiAssignment, blackbox_iteration, exact_score,
                     init_kmeanspp, init_uniform, lloyd_exact_iteration,
                     run_clustering, score, sheesh_iteration)
from .metric import nearest_brute, sq_l2
from .sanns import BulkPlan, SeededQuery, plan_bulk, run_bulk, seeded_query
from .vamanasp import (AlphaGraph, AlphaParams, ProjectionSeeder, build_slow,
                       greedy_search_counted, projection_seed,
                       seeded_greedy_search)

__version__ = "0.1.0"
