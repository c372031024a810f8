class Sums {
    long sumOfSquares(int[] values) {
        long total = 0;
        for (int i = 0; i < values.length; i++) {
            total += values[i] * values[i];
        }
        return total;
    }
}
