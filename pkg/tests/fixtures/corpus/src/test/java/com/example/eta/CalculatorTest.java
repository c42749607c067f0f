package com.example.eta;

import com.example.Calculator;
import org.junit.jupiter.api.Test;

import static org.junit.jupiter.api.Assertions.*;

class CalculatorTest {
    @Test
    void addAndSubtract() {
        Calculator c = new Calculator();
        int sum = c.add(2, 3);
        assertTrue(sum > 0, "sum is positive");
        int diff = c.subtract(3, 2);
        assertEquals(1, diff, "difference of neighbours");
    }

    @Test
    void multiplyAndDivide() {
        Calculator c = new Calculator();
        assertEquals(0, c.multiply(0, 1), "zero product");
        assertEquals(1, c.divide(1, 1), "unit quotient");
    }

    @Test
    void threeOperations() {
        Calculator c = new Calculator();
        assertEquals(0, c.add(0, 0), "zero sum");
        assertEquals(0, c.subtract(1, 1), "zero difference");
        assertEquals(1, c.multiply(1, 1), "unit product");
    }
}
