package com.example.it;

import com.example.Calculator;
import org.junit.jupiter.api.Disabled;
import org.junit.jupiter.api.Test;

import static org.junit.jupiter.api.Assertions.*;

class CalculatorTest {
    @Disabled("flaky on CI")
    @Test
    void addLater() {
        Calculator c = new Calculator();
        assertEquals(1, c.add(1, 0));
    }

    @Test
    @Disabled
    void subtractLater() {
        Calculator c = new Calculator();
        assertEquals(0, c.subtract(1, 1));
    }

    @Test
    void addZero() {
        Calculator c = new Calculator();
        assertEquals(0, c.add(0, 0));
    }
}
