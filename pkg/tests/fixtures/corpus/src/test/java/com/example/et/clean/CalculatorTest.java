package com.example.et.clean;

import com.example.Calculator;
import org.junit.jupiter.api.Test;

import static org.junit.jupiter.api.Assertions.*;

class CalculatorTest {
    @Test
    void commentAndStatement() {
        // a comment does not make a test empty, and neither does one statement
        assertEquals(0, new Calculator().recall());
    }
}
