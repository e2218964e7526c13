# Tests for mmwave-ia
