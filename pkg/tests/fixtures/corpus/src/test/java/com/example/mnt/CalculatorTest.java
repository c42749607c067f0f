package com.example.mnt;

import com.example.Calculator;
import org.junit.jupiter.api.Test;

import static org.junit.jupiter.api.Assertions.*;

class CalculatorTest {
    @Test
    void multiplies() {
        Calculator c = new Calculator();
        assertEquals(42, c.multiply(6, 7));
    }

    @Test
    void subtractsIntoNegative() {
        Calculator c = new Calculator();
        assertEquals(-7, c.subtract(-3, 4));
    }

    @Test
    void dividesEvenly() {
        Calculator c = new Calculator();
        int q = c.divide(12, 4);
        assertEquals(3, q);
    }
}
