#pragma once

#include "mbrot/adapter.hpp"
#include "mbrot/doc_utility.hpp"
#include "mbrot/document.hpp"
#include "mbrot/error.hpp"
#include "mbrot/eval.hpp"
#include "mbrot/io.hpp"
#include "mbrot/mbr.hpp"
#include "mbrot/ot/assignment.hpp"
#include "mbrot/ot/plan.hpp"
#include "mbrot/ot/sinkhorn.hpp"
#include "mbrot/ot/transport_simplex.hpp"
#include "mbrot/parallel.hpp"
#include "mbrot/pipeline.hpp"
#include "mbrot/sentence_utility.hpp"
#include "mbrot/version.hpp"
