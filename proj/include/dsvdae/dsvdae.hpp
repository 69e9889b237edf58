#pragma once

#include "dsvdae/activation.hpp"
#include "dsvdae/checkpoint.hpp"
#include "dsvdae/dataset.hpp"
#include "dsvdae/experiment.hpp"
#include "dsvdae/grad_check.hpp"
#include "dsvdae/graph.hpp"
#include "dsvdae/hypersphere.hpp"
#include "dsvdae/model.hpp"
#include "dsvdae/parameters.hpp"
#include "dsvdae/scoring.hpp"
#include "dsvdae/sparse.hpp"
#include "dsvdae/synthetic.hpp"
#include "dsvdae/tensor.hpp"
#include "dsvdae/training.hpp"
